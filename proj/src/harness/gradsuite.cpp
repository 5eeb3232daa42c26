#include <cmath>
#include <ostream>
#include <random>

#include "gtp/errors.hpp"
#include "gtp/harness.hpp"

namespace gtp {

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.values()) v = n(rng);
  return m;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

struct Instance {
  ParamStore params;
  LossBuilder build;
};

// One random instance of the named loss. Shapes, group sizes and constants
// are all drawn per instance.
Instance make_instance(std::string_view loss, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dim(2, 6);
  const std::size_t r = dim(rng), c = dim(rng);
  Instance in;
  auto& ps = in.params;
  ps.add("a", random_matrix(r, c, rng));
  ps.add("b", random_matrix(r, c, rng));

  if (loss == "m2m") {
    in.build = [](Tape& t, ParamStore& p) { return loss_m2m(t.param(p.get("a")), ad::tanh(t.param(p.get("b")))); };
  } else if (loss == "t2t") {
    const std::size_t vocab = c + 2;
    ps = ParamStore{};
    ps.add("a", random_matrix(r, c, rng));
    ps.add("b", random_matrix(c, vocab, rng));
    std::vector<std::size_t> targets(r);
    std::uniform_int_distribution<std::size_t> tok(0, vocab - 1);
    for (auto& x : targets) x = tok(rng);
    in.build = [targets](Tape& t, ParamStore& p) {
      return loss_t2t(targets, ad::matmul(t.param(p.get("a")), t.param(p.get("b"))));
    };
  } else if (loss == "m2t") {
    in.build = [](Tape& t, ParamStore& p) { return loss_m2t(t.param(p.get("a")), ad::tanh(t.param(p.get("b")))); };
  } else if (loss == "gtp") {
    std::uniform_int_distribution<std::size_t> group_size(2, 12);
    std::uniform_real_distribution<double> u(0.0, 0.6), temp(0.3, 2.0);
    std::vector<LatentRep> group;
    std::vector<double> sims;
    for (std::size_t j = group_size(rng); j > 0; --j) {
      group.emplace_back(random_matrix(r, c, rng));
      sims.push_back(u(rng));
    }
    const double tau = temp(rng);
    in.build = [group, sims, tau](Tape& t, ParamStore& p) {
      return loss_gtp(ad::add(t.param(p.get("a")), ad::tanh(t.param(p.get("b")))), group, sims, GtpOptions{tau});
    };
  } else if (loss == "sentiment") {
    ps = ParamStore{};
    ps.add("a", random_matrix(1, kSentimentClasses, rng));
    std::vector<double> target_raw(kSentimentClasses);
    for (auto& x : target_raw) x = std::normal_distribution<double>(0.0, 1.0)(rng);
    const auto target = softmax(target_raw, 1.0);
    in.build = [target](Tape& t, ParamStore& p) {
      return loss_sentiment(t.constant(Matrix::row_vector(target)), ad::softmax_rows(t.param(p.get("a")), 1.0));
    };
  } else if (loss == "triplet") {
    ps.add("c", random_matrix(r, c, rng));
    // Keep the hinge clear of its kink so central differences are valid.
    const double dp = squared_distance(ps.get("a").value.values(), ps.get("b").value.values());
    const double dn = squared_distance(ps.get("a").value.values(), ps.get("c").value.values());
    const double margin = std::uniform_int_distribution<int>(0, 1)(rng) ? dn - dp + 1.0 : std::max(0.0, dn - dp - 1.0);
    if (!(dn - dp - margin < -0.5 || dn - dp - margin > 0.5)) throw Error("triplet instance too close to the hinge");
    in.build = [margin](Tape& t, ParamStore& p) {
      return loss_triplet(t.param(p.get("a")), t.param(p.get("b")), t.param(p.get("c")), margin);
    };
  } else if (loss == "pairwise") {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    const double sim = u(rng);
    in.build = [sim](Tape& t, ParamStore& p) {
      return loss_pairwise(t.param(p.get("a")), t.param(p.get("b")), sim, 0.1);
    };
  } else if (loss == "contrastive") {
    std::uniform_int_distribution<std::size_t> count(1, 8);
    std::uniform_real_distribution<double> temp(0.1, 1.0);
    std::vector<Matrix> negatives;
    for (std::size_t j = count(rng); j > 0; --j) negatives.push_back(random_matrix(r, c, rng));
    ps.add("c", random_matrix(r, c, rng));
    const double tau = temp(rng);
    in.build = [negatives, tau](Tape& t, ParamStore& p) {
      std::vector<Var> negs{t.param(p.get("c"))};
      for (const auto& n : negatives) negs.push_back(t.constant(n));
      return loss_contrastive(t.param(p.get("a")), t.param(p.get("b")), negs, tau);
    };
  } else if (loss == "total") {
    std::uniform_real_distribution<double> coef(0.0, 5.0);
    const double alpha = coef(rng), beta = coef(rng);
    std::vector<LatentRep> group{LatentRep(random_matrix(r, c, rng)), LatentRep(random_matrix(r, c, rng))};
    std::vector<double> sims{0.1, 0.4};
    ps.add("s", random_matrix(1, kSentimentClasses, rng));
    const Matrix target = Matrix::row_vector(softmax(std::vector<double>(kSentimentClasses, 0.0), 1.0));
    in.build = [=](Tape& t, ParamStore& p) {
      Var a = t.param(p.get("a")), b = t.param(p.get("b"));
      Var sum = ad::add(ad::add(loss_m2m(a, ad::tanh(b)), loss_m2t(a, b)),
                        ad::scale(loss_gtp(a, group, sims), alpha));
      return ad::add(sum, ad::scale(loss_sentiment(t.constant(target), ad::softmax_rows(t.param(p.get("s")), 1.0)), beta));
    };
  } else {
    throw InvalidConfig("unknown loss '" + std::string(loss) + "'");
  }
  return in;
}

}  // namespace

const std::vector<std::string>& gradcheck_losses() {
  static const std::vector<std::string> names{"m2m",      "t2t",     "m2t",        "gtp",  "sentiment",
                                              "triplet",  "pairwise", "contrastive", "total"};
  return names;
}

std::vector<LossCheck> cmd_gradcheck(const GradSuiteOptions& opts, std::ostream* log) {
  if (opts.instances == 0) throw InvalidConfig("gradcheck needs at least one instance");
  if (!opts.corrupt.empty()) {
    bool known = false;
    for (const auto& n : gradcheck_losses()) known = known || n == opts.corrupt;
    if (!known) throw InvalidConfig("unknown loss '" + opts.corrupt + "' for corrupt");
  }
  std::vector<LossCheck> out;
  for (std::size_t li = 0; li < gradcheck_losses().size(); ++li) {
    const std::string& name = gradcheck_losses()[li];
    std::mt19937_64 rng(opts.seed * 1000003ULL + li);
    LossCheck check{name};
    GradCheckOptions gc;
    gc.step = opts.step;
    gc.tolerance = opts.tolerance;
    if (opts.corrupt == name) gc.corrupt_analytic = [](ParamStore& p) { p.all().front().grad[0] += 1e-3; };
    while (check.instances < opts.instances) {
      Instance in;
      try {
        in = make_instance(name, rng);
      } catch (const InvalidConfig&) {
        throw;
      } catch (const Error&) {
        continue;  // resample
      }
      const auto report = finite_diff_check(in.build, in.params, gc);
      ++check.instances;
      if (!report.passed) ++check.failures;
      check.worst_rel_error = std::max(check.worst_rel_error, report.max_rel_error);
    }
    check.passed = check.failures == 0;
    if (log)
      *log << (check.passed ? "PASS " : "FAIL ") << name << "  instances " << check.instances << "  failures "
           << check.failures << "  worst rel error " << check.worst_rel_error << '\n';
    out.push_back(std::move(check));
  }
  return out;
}

}  // namespace gtp
