#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <algorithm>
#include <numeric>
#include <random>

#include "gtp/errors.hpp"
#include "gtp/gradcheck.hpp"
#include "gtp/losses.hpp"

using namespace gtp;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(r, c);
  for (auto& x : m.values()) x = dist(rng);
  return m;
}

double brute_sq_dist(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c = 0; c < a.cols(); ++c) s += (a(r, c) - b(r, c)) * (a(r, c) - b(r, c));
  return s;
}

}  // namespace

TEST_CASE("loss_m2m") {
  Tape t;
  Matrix m{{1.0, 0.0}};
  CHECK(loss_m2m(t.constant(m), t.constant(m)).scalar() == 0.0);
  CHECK(loss_m2m(t.constant(m), t.constant(Matrix{{0.0, 0.0}})).scalar() == 1.0);
  std::mt19937_64 rng(4);
  Matrix a = random_matrix(5, 7, rng), b = random_matrix(5, 7, rng);
  CHECK(loss_m2m(t.constant(a), t.constant(b)).scalar() == doctest::Approx(brute_sq_dist(a, b)).epsilon(1e-13));
  CHECK_THROWS_AS(loss_m2m(t.constant(a), t.constant(Matrix(7, 5))), ShapeError);
}

TEST_CASE("loss_t2t") {
  Tape t;
  const std::vector<std::size_t> targets{5, 6, kEosId};
  Matrix sharp(3, 8, -50.0);
  for (std::size_t r = 0; r < 3; ++r) sharp(r, targets[r]) = 50.0;
  CHECK(loss_t2t(targets, t.constant(sharp)).scalar() < 1e-12);

  CHECK(loss_t2t(targets, t.constant(Matrix(3, 8, 0.3))).scalar() == doctest::Approx(std::log(8.0)));

  // Hand log-sum-exp: rows (1, 2, 0.5) -> target 1, (0.3, -0.2, 0.1) -> target 2.
  const std::vector<std::size_t> two{1, 2};
  CHECK(loss_t2t(two, t.constant(Matrix{{1.0, 2.0, 0.5}, {0.3, -0.2, 0.1}})).scalar() ==
        doctest::Approx(0.7751540508882002).epsilon(1e-12));

  // PAD positions are masked out of the mean.
  const std::vector<std::size_t> padded{1, 2, kPadId};
  CHECK(loss_t2t(padded, t.constant(Matrix{{1.0, 2.0, 0.5}, {0.3, -0.2, 0.1}, {9.0, -9.0, 0.0}})).scalar() ==
        doctest::Approx(0.7751540508882002).epsilon(1e-12));

  CHECK_THROWS_AS(loss_t2t(two, t.constant(Matrix(3, 3))), ShapeError);
}

TEST_CASE("loss_m2t") {
  Tape t;
  Matrix a{{0.5, 1.0}, {2.0, -1.0}};
  CHECK(loss_m2t(t.constant(a), t.constant(a)).scalar() == 0.0);
  Matrix b = a;
  b(1, 0) += 1.0;
  CHECK(loss_m2t(t.constant(a), t.constant(b)).scalar() == 1.0);
  std::mt19937_64 rng(8);
  Matrix c = random_matrix(4, 6, rng), d = random_matrix(4, 6, rng);
  CHECK(loss_m2t(t.constant(c), t.constant(d)).scalar() == doctest::Approx(brute_sq_dist(c, d)).epsilon(1e-13));
  CHECK_THROWS_AS(loss_m2t(t.constant(c), t.constant(Matrix(4, 5))), ShapeError);
}

TEST_CASE("loss_gtp examples") {
  Tape t;
  Var anchor = t.constant(Matrix{{1.0, 0.0}});
  const double s3 = std::sqrt(3.0) / 2.0;
  std::vector<LatentRep> group{LatentRep(Matrix{{0.5, s3}}), LatentRep(Matrix{{0.5, -s3}})};
  // cos = (0.5, 0.5), BLEU = (0.2, 0.8)
  std::vector<double> text{0.2, 0.8};
  CHECK(loss_gtp(anchor, group, text).scalar() == doctest::Approx(0.04243).epsilon(1e-4));
  CHECK(loss_gtp(anchor, group, text).scalar() == doctest::Approx(0.042431519086685396).epsilon(1e-12));

  std::vector<double> matched{0.5, 0.5};
  CHECK(loss_gtp(anchor, group, matched).scalar() < 1e-12);

  std::vector<LatentRep> empty;
  std::vector<double> none;
  CHECK_THROWS_AS(loss_gtp(anchor, empty, none), InvalidInput);
  std::vector<LatentRep> zero{LatentRep(Matrix{{0.0, 0.0}})};
  std::vector<double> one{0.1};
  CHECK_THROWS_AS(loss_gtp(anchor, zero, one), ZeroNormError);
  CHECK_THROWS_AS(loss_gtp(t.constant(Matrix{{0.0, 0.0}}), group, text), ZeroNormError);
}

TEST_CASE("loss_gtp invariants on random groups") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    Tape t;
    const std::size_t k = 2 + trial % 12;
    Var anchor = t.constant(random_matrix(2, 3, rng));
    std::vector<LatentRep> group;
    std::vector<double> text;
    for (std::size_t j = 0; j < k; ++j) {
      group.emplace_back(random_matrix(2, 3, rng));
      text.push_back(u(rng));
    }
    const double base = loss_gtp(anchor, group, text).scalar();
    CHECK(base >= 0.0);

    // Permuting the group permutes both topology vectors identically.
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<LatentRep> pg;
    std::vector<double> pt;
    for (std::size_t j : perm) {
      pg.push_back(group[j]);
      pt.push_back(text[j]);
    }
    CHECK(std::abs(loss_gtp(anchor, pg, pt).scalar() - base) <= 1e-12);

    // A matched target topology gives zero loss.
    std::vector<double> cos_sims;
    for (const auto& g : group) {
      Tape tt;
      cos_sims.push_back(ad::cosine(tt.constant(anchor.value()), tt.constant(g.values)).scalar());
    }
    CHECK(loss_gtp(anchor, group, cos_sims).scalar() < 1e-12);

    // Shifting the target similarities by a constant leaves the loss intact.
    std::vector<double> shifted = text;
    const double c = u(rng) * 3.0;
    for (auto& s : shifted) s += c;
    CHECK(std::abs(loss_gtp(anchor, group, shifted).scalar() - base) <= 1e-10);
  }
}

TEST_CASE("loss_gtp never sends gradient into the group") {
  std::mt19937_64 rng(13);
  ParamStore ps;
  ps.add("anchor", random_matrix(2, 4, rng));
  for (int j = 0; j < 5; ++j) ps.add("q" + std::to_string(j), random_matrix(2, 4, rng));
  std::vector<double> text{0.1, 0.4, 0.0, 0.7, 0.2};
  Tape t;
  std::vector<Var> group;
  for (int j = 0; j < 5; ++j) group.push_back(t.param(ps.get("q" + std::to_string(j))));
  t.backward(loss_gtp(t.param(ps.get("anchor")), group, text));
  double anchor_norm = 0.0;
  for (double g : ps.get("anchor").grad.values()) anchor_norm += std::abs(g);
  CHECK(anchor_norm > 0.0);
  for (int j = 0; j < 5; ++j)
    for (double g : ps.get("q" + std::to_string(j)).grad.values()) CHECK(g == 0.0);
}

TEST_CASE("loss_sentiment") {
  Tape t;
  Matrix s(1, 7, 1.0 / 7.0);
  CHECK(loss_sentiment(t.constant(s), t.constant(s)).scalar() == 0.0);
  Matrix a(1, 7), b(1, 7);
  a(0, 3) = 1.0;
  b(0, 5) = 1.0;
  CHECK(loss_sentiment(t.constant(a), t.constant(b)).scalar() == 2.0);
  std::mt19937_64 rng(6);
  Matrix p = random_matrix(1, 7, rng), q = random_matrix(1, 7, rng);
  CHECK(loss_sentiment(t.constant(p), t.constant(q)).scalar() == doctest::Approx(brute_sq_dist(p, q)).epsilon(1e-13));
  CHECK_THROWS_AS(loss_sentiment(t.constant(Matrix(1, 6)), t.constant(Matrix(1, 6))), ShapeError);
}

TEST_CASE("loss_total") {
  LossBreakdown zero;
  CHECK(loss_total(zero, LossCoefficients{}).total == 0.0);
  LossCoefficients d;
  CHECK(d.alpha == 500.0);
  CHECK(d.beta == 5.0);
  CHECK(d.gamma == 0.25);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    LossBreakdown p{u(rng), u(rng), u(rng), u(rng), u(rng), u(rng)};
    LossCoefficients c{u(rng) * 100, u(rng), u(rng)};
    auto out = loss_total(p, c);
    CHECK(std::abs(out.total - (p.m2m + p.t2t + p.m2t + c.alpha * p.gtp + c.beta * p.sentiment + c.gamma * p.reg)) <=
          1e-10);
  }
  CHECK_THROWS_AS(loss_total(zero, LossCoefficients{-1.0, 5.0, 0.25}), InvalidConfig);
}

TEST_CASE("loss_triplet") {
  Tape t;
  Var a = t.constant(Matrix{{1.0, 2.0}});
  CHECK(loss_triplet(a, a, t.constant(Matrix{{5.0, -1.0}}), 0.0).scalar() == 0.0);
  Var p = t.constant(Matrix{{2.0, 2.0}});
  Var n = t.constant(Matrix{{1.0, 3.0}});
  CHECK(loss_triplet(a, p, n, 0.2).scalar() == doctest::Approx(0.2));
  // |a-p|^2 = 1, |a-n|^2 = 4, margin 1 -> max(0, -2) = 0
  CHECK(loss_triplet(a, p, t.constant(Matrix{{1.0, 4.0}}), 1.0).scalar() == 0.0);
  CHECK_THROWS_AS(loss_triplet(a, p, t.constant(Matrix(1, 3)), 0.2), ShapeError);
}

TEST_CASE("loss_pairwise") {
  Tape t;
  Var a = t.constant(Matrix{{1.0, 2.0}});
  Var b = t.constant(Matrix{{1.0, 3.0}});
  CHECK(loss_pairwise(a, b, 0.05, 0.1).scalar() == 0.0);
  CHECK(loss_pairwise(a, a, 0.5, 0.1).scalar() == 0.0);
  CHECK(loss_pairwise(a, b, 0.5, 0.1).scalar() == 1.0);
  CHECK_THROWS_AS(loss_pairwise(a, t.constant(Matrix(1, 3)), 0.5, 0.1), ShapeError);
}

TEST_CASE("loss_contrastive") {
  Tape t;
  Var z = t.constant(Matrix{{1.0, 0.0}});
  std::vector<Var> orth{t.constant(Matrix{{0.0, 1.0}})};
  CHECK(loss_contrastive(z, z, orth, 1.0).scalar() == doctest::Approx(0.3132616875182228).epsilon(1e-12));

  for (std::size_t n = 1; n <= 6; ++n) {
    std::vector<Var> same(n, z);
    CHECK(loss_contrastive(z, z, same, 0.5).scalar() == doctest::Approx(std::log(n + 1.0)).epsilon(1e-12));
  }

  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    std::vector<Var> negs{t.constant(random_matrix(1, 4, rng)), t.constant(random_matrix(1, 4, rng))};
    CHECK(loss_contrastive(t.constant(random_matrix(1, 4, rng)), t.constant(random_matrix(1, 4, rng)), negs, 0.2)
              .scalar() > 0.0);
  }
  CHECK_THROWS_AS(loss_contrastive(z, z, std::span<const Var>{}, 1.0), InvalidInput);
}

TEST_CASE("contrastive augmentation and triplet mining") {
  std::mt19937_64 rng(1);
  Matrix f(4, 20, 1.0);
  Matrix g = contrastive_augment(f, rng);
  CHECK(g.same_shape(f));
  std::size_t masked_cols = 0;
  for (std::size_t c = 0; c < 20; ++c) {
    bool all_small = true;
    for (std::size_t r = 0; r < 4; ++r) all_small = all_small && std::abs(g(r, c)) < 0.1;
    masked_cols += all_small;
  }
  CHECK(masked_cols == 2);

  std::vector<double> sims{1.0, 0.3, 0.05, 0.3, 0.01};
  auto [pos, neg] = mine_triplet(0, sims);
  CHECK(pos == 1);
  CHECK(neg == 4);
  CHECK_THROWS_AS(mine_triplet(0, std::vector<double>{1.0, 0.2}), InvalidInput);
}

TEST_CASE("each loss agrees with central differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    ParamStore ps;
    ps.add("a", random_matrix(2, 3, rng));
    ps.add("b", random_matrix(2, 3, rng));
    ps.add("c", random_matrix(2, 3, rng));
    std::vector<LatentRep> queue;
    std::vector<double> text;
    std::uniform_real_distribution<double> u(0.0, 0.5);
    for (int j = 0; j < 6; ++j) {
      queue.emplace_back(random_matrix(2, 3, rng));
      text.push_back(u(rng));
    }
    const std::vector<std::size_t> targets{1, 2};
    auto check = [&](const char* name, const LossBuilder& fn) {
      auto report = finite_diff_check(fn, ps, 1e-6, 1e-5);
      CHECK_MESSAGE(report.passed, name << " seed " << seed << " rel " << report.max_rel_error);
    };
    check("gtp", [&](Tape& t, ParamStore& p) { return loss_gtp(ad::tanh(t.param(p.get("a"))), queue, text); });
    check("m2m", [&](Tape& t, ParamStore& p) { return loss_m2m(t.param(p.get("a")), ad::tanh(t.param(p.get("b")))); });
    check("t2t", [&](Tape& t, ParamStore& p) {
      return loss_t2t(targets, ad::mul(t.param(p.get("a")), t.param(p.get("b"))));
    });
    check("m2t", [&](Tape& t, ParamStore& p) { return loss_m2t(t.param(p.get("a")), t.param(p.get("b"))); });
    check("triplet", [&](Tape& t, ParamStore& p) {
      return loss_triplet(t.param(p.get("a")), t.param(p.get("b")), t.param(p.get("c")), 5.0);
    });
    check("pairwise",
          [&](Tape& t, ParamStore& p) { return loss_pairwise(t.param(p.get("a")), t.param(p.get("b")), 0.4, 0.1); });
    check("contrastive", [&](Tape& t, ParamStore& p) {
      std::vector<Var> negs{t.param(p.get("c")), t.constant(queue[0].values)};
      return loss_contrastive(t.param(p.get("a")), t.param(p.get("b")), negs, 0.5);
    });
  }
}
