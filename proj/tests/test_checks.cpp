#include <doctest.h>

#include "firth/checks.hpp"
#include "firth/error.hpp"

using namespace firth;

TEST_CASE("fim check over random instances") {
  FimCheckOptions o;
  o.instances = 6;
  const FimCheckResult r = fim_check(o);
  CHECK(r.instances == 6);
  CHECK(r.max_abs_residual <= 1e-6);
  o.samples = 9;
  CHECK_THROWS_AS(fim_check(o), InvalidInput);
}

TEST_CASE("grad check per architecture") {
  for (Arch arch : {Arch::logistic, Arch::mlp, Arch::cosine}) {
    GradCheckOptions o;
    o.arch = arch;
    o.kind = PenaltyKind::confidence;
    o.triples = 4;
    const GradCheckResult r = grad_check(o);
    INFO(to_string(arch));
    CHECK(r.compared + r.skipped > 0);
    CHECK(r.max_rel_error <= 1e-5);
    if (arch != Arch::mlp) CHECK(r.skipped == 0);
  }
  GradCheckOptions sub;
  sub.arch = Arch::mlp;
  sub.hidden1 = 100;
  sub.hidden2 = 50;
  sub.triples = 2;
  sub.coordinates = 40;
  const GradCheckResult r = grad_check(sub);
  CHECK(r.compared + r.skipped == 80);
  CHECK(r.max_rel_error <= 1e-5);

  GradCheckOptions bad;
  bad.classes = 1;
  CHECK_THROWS_AS(grad_check(bad), InvalidInput);
}
