#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "ventcast/config/run_config.hpp"
#include "ventcast/error.hpp"
#include "ventcast/harness/experiment.hpp"
#include "ventcast/harness/metrics.hpp"
#include "ventcast/harness/split.hpp"

using namespace ventcast;
using namespace ventcast::harness;

namespace {

// Direct pair count over every (positive, negative) pair.
double pair_auroc(const std::vector<double>& s, const std::vector<double>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1.0 || y[j] != 0.0) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return wins / pairs;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::internal;
}

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("P" + std::to_string(1000 + i));
  return out;
}

}  // namespace

TEST_CASE("auroc small worked example") {
  std::vector<double> s{0.1, 0.4, 0.35, 0.8}, y{0, 0, 1, 1};
  CHECK(auroc(s, y) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("auroc ties count one half") {
  std::vector<double> s{0.5, 0.5, 0.5, 0.5}, y{0, 1, 0, 1};
  CHECK(auroc(s, y) == 0.5);
  std::vector<double> s2{0.2, 0.6, 0.6, 0.9}, y2{0, 0, 1, 1};
  CHECK(auroc(s2, y2) == doctest::Approx(pair_auroc(s2, y2)));
  CHECK(auroc(s2, y2) == doctest::Approx(0.875));
}

TEST_CASE("auroc matches the pair count and is invariant to monotone maps") {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> coarse(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + trial % 40;
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse(rng) / 10.0;
      y[i] = (rng() % 2) ? 1.0 : 0.0;
    }
    y[0] = 0.0;
    y[1] = 1.0;
    const double a = auroc(s, y);
    CHECK(a == doctest::Approx(pair_auroc(s, y)).epsilon(1e-12));
    std::vector<double> t(n);
    std::transform(s.begin(), s.end(), t.begin(), [](double v) { return std::exp(3.0 * v) - 7.0; });
    CHECK(auroc(t, y) == doctest::Approx(a).epsilon(1e-12));
    std::vector<double> flipped(n);
    std::transform(s.begin(), s.end(), flipped.begin(), [](double v) { return -v; });
    CHECK(auroc(flipped, y) == doctest::Approx(1.0 - a).epsilon(1e-12));
  }
}

TEST_CASE("auroc rejects a single class and bad input") {
  std::vector<double> s{0.1, 0.2}, ones{1, 1}, bad{0, 2}, short_y{1};
  CHECK(kind_of([&] { auroc(s, ones); }) == ErrorKind::undefined_metric);
  CHECK(kind_of([&] { auroc(s, bad); }) != ErrorKind::undefined_metric);
  CHECK_THROWS_AS(auroc(s, short_y), Error);
}

TEST_CASE("early stopping keeps the earliest best epoch") {
  std::vector<double> track{0.6, 0.7, 0.7, 0.65};
  auto s = early_stop(track, 2);
  CHECK(s.best_epoch == 1);
  CHECK(s.stop);
  CHECK_FALSE(early_stop(std::span(track).first(3), 2).stop);
  CHECK_FALSE(early_stop(track, 3).stop);
  CHECK_FALSE(early_stop(track, 0).stop);
  std::vector<double> rising{0.5, 0.6, 0.7};
  CHECK(early_stop(rising, 1).best_epoch == 2);
  CHECK_FALSE(early_stop(rising, 1).stop);
}

TEST_CASE("summaries use the sample standard deviation") {
  std::vector<double> v{0.70, 0.72, 0.74};
  auto s = summarize(v);
  CHECK(s.mean == doctest::Approx(0.72));
  CHECK(s.sd == doctest::Approx(0.02));
  CHECK(format_mean_sd(s) == "0.720 \xC2\xB1 0.020");
  std::vector<double> one{0.8};
  CHECK(summarize(one).sd == 0.0);
}

TEST_CASE("split sizes, determinism and a shared holdout") {
  const auto all = ids(100);
  SplitSpec spec;
  auto a = split(all, spec, 1);
  CHECK(a.holdout.size() == 10);
  CHECK(a.train.size() == 80);
  CHECK(a.val.size() == 10);
  check_disjoint(a);
  std::set<std::string> u(a.holdout.begin(), a.holdout.end());
  u.insert(a.train.begin(), a.train.end());
  u.insert(a.val.begin(), a.val.end());
  CHECK(u.size() == 100);

  auto again = split(all, spec, 1);
  CHECK(again.train == a.train);
  CHECK(again.val == a.val);

  auto reversed = all;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(split(reversed, spec, 1).train == a.train);

  auto b = split(all, spec, 2);
  CHECK(b.holdout == a.holdout);
  CHECK(b.val != a.val);
  CHECK(std::is_sorted(b.train.begin(), b.train.end()));
}

TEST_CASE("split refuses tiny or duplicated inputs and detects overlap") {
  CHECK_THROWS_AS(split(ids(5), SplitSpec{}, 1), Error);
  auto dup = ids(20);
  dup[3] = dup[4];
  CHECK_THROWS_AS(split(dup, SplitSpec{}, 1), Error);
  Split s{{"a"}, {"b", "c"}, {"c"}};
  CHECK(kind_of([&] { check_disjoint(s); }) == ErrorKind::leakage);
}

TEST_CASE("run config parses, rejects unknown keys and round-trips") {
  const std::string text =
      "# desk run\n"
      "[synth]\npatients = 120\nsignal = temporal\n\n"
      "[encoder]\nn_layers = 1\nd_model = 16\nn_heads = 2\nd_head = 8\nd_inner = 32\nmax_len = 48\n"
      "[meta]\nlr = 0.001\n"
      "[finetune]\npooling = mean\n"
      "[split]\nseeds = 4, 5\n"
      "[task]\ntasks = mortality\n";
  auto cfg = config::parse_run_config(text);
  CHECK(cfg.synth.patients == 120);
  CHECK(cfg.synth.signal == cohort::Signal::temporal);
  CHECK(cfg.encoder.d_model == 16);
  CHECK(cfg.meta_lr == 0.001);
  CHECK(cfg.poolings == std::vector<agg::Pooling>{agg::Pooling::mean});
  CHECK(cfg.seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(cfg.tasks == std::vector<cohort::Task>{cohort::Task::mortality});
  CHECK(cfg.pretrain_steps == 200000);

  auto again = config::parse_run_config(cfg.to_text());
  CHECK(again.to_text() == cfg.to_text());
  CHECK(again.hash() == cfg.hash());
  CHECK(config::RunConfig{}.hash() != cfg.hash());

  CHECK(kind_of([] { config::parse_run_config("[meta]\nlearning_rate = 1\n"); }) == ErrorKind::config);
  CHECK(kind_of([] { config::parse_run_config("[nope]\n"); }) == ErrorKind::config);
  CHECK(kind_of([] { config::parse_run_config("[meta]\nlr = 1\nlr = 2\n"); }) == ErrorKind::config);
  CHECK(kind_of([] { config::parse_run_config("[meta]\nlr\n"); }) == ErrorKind::config);
  CHECK(kind_of([] { config::parse_run_config("[meta]\nepochs = many\n"); }) == ErrorKind::config);
}

TEST_CASE("report table lists mean and sd per task and model") {
  std::vector<MetricsReport> reports{
      {cohort::Task::pmv, agg::Pooling::bilstm, {1, 2, 3}, {0.70, 0.72, 0.74}, 0.72, 0.02, "abc"},
      {cohort::Task::mortality, agg::Pooling::bilstm, {1, 2, 3}, {0.8, 0.8, 0.8}, 0.8, 0.0, "abc"},
      {cohort::Task::pmv, agg::Pooling::mean, {1, 2, 3}, {0.5, 0.6, 0.7}, 0.6, 0.1, "abc"},
  };
  const auto text = format_report(reports);
  CHECK(text.find("0.720 \xC2\xB1 0.020") != std::string::npos);
  CHECK(text.find("0.800 \xC2\xB1 0.000") != std::string::npos);
  CHECK(text.find("0.600 \xC2\xB1 0.100") != std::string::npos);
  CHECK(text.find("Bi-LSTM") != std::string::npos);
  CHECK(text.find("PMV") < text.find("Mortality"));
}
