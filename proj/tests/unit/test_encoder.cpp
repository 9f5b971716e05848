#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "reference_encoder.hpp"
#include "ventcast/encoder/pretrain.hpp"
#include "ventcast/error.hpp"
#include "ventcast/numerics/ops.hpp"

using namespace ventcast;
using namespace ventcast::encoder;

namespace {

EncoderConfig tiny_config(std::size_t max_len = 16) {
  EncoderConfig c;
  c.n_layers = 2;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_head = 4;
  c.d_inner = 12;
  c.max_len = max_len;
  return c;
}

text::Vocabulary small_vocab() {
  std::vector<std::string> corpus{"pt on vent sedated stable overnight", "rr 18 sat 97 on fio2", "plan wean vent"};
  return text::Vocabulary::build(corpus, 1, 0);
}

// Scales every parameter so activations are far from the trivial regime.
void perturb(EncoderModel& m, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  for (auto& p : m.parameters()) {
    auto t = p;
    for (auto& v : t.mutable_data()) v += normal(rng);
  }
}

// Pairwise precedence straight from the order: does `a` come before `b`?
bool precedes(const std::vector<std::size_t>& order, std::size_t a, std::size_t b) {
  auto ia = std::find(order.begin(), order.end(), a);
  auto ib = std::find(order.begin(), order.end(), b);
  return ia < ib;
}

}  // namespace

TEST_CASE("sample_permutation examples") {
  auto one = sample_permutation(1, 7);
  CHECK(one.order == std::vector<std::size_t>{0});
  CHECK(one.targets().size() == 1);
  std::vector<std::uint8_t> cls_only{1};
  auto fixed_one = sample_permutation(1, 7, 1.0 / 6.0, cls_only);
  CHECK(fixed_one.targets().empty());
  CHECK_THROWS_AS(sample_permutation(0, 1), Error);

  auto plan = make_plan({2, 0, 1}, 3);
  // content: pos0 sees {2,0}; pos1 sees {2,0,1}; pos2 sees {2}
  CHECK(plan.content_visible(0, 2));
  CHECK(plan.content_visible(0, 0));
  CHECK_FALSE(plan.content_visible(0, 1));
  CHECK(plan.content_visible(1, 0));
  CHECK(plan.content_visible(1, 1));
  CHECK(plan.content_visible(1, 2));
  CHECK(plan.content_visible(2, 2));
  CHECK_FALSE(plan.content_visible(2, 0));
  CHECK_FALSE(plan.content_visible(2, 1));
  // query: pos0 sees {2}; pos1 sees {2,0}; pos2 sees {}
  CHECK(plan.query_visible(0, 2));
  CHECK_FALSE(plan.query_visible(0, 0));
  CHECK_FALSE(plan.query_visible(0, 1));
  CHECK(plan.query_visible(1, 2));
  CHECK(plan.query_visible(1, 0));
  CHECK_FALSE(plan.query_visible(1, 1));
  for (std::size_t k = 0; k < 3; ++k) CHECK_FALSE(plan.query_visible(2, k));

  CHECK_THROWS_AS(make_plan({0, 0, 1}, 1), Error);

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto p = sample_permutation(9, seed, 1.0 / 3.0);
    auto sorted = p.order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::size_t> expected(9);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(sorted == expected);
    CHECK(p.cutoff == 9 - 3);
  }
  CHECK(sample_permutation(12, 3).order == sample_permutation(12, 3).order);
}

TEST_CASE("fixed positions rank first and are never targets") {
  std::vector<std::uint8_t> fixed{1, 0, 0, 0, 0, 0, 0, 1, 1};
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto p = sample_permutation(fixed.size(), seed, 1.0 / 6.0, fixed);
    CHECK_NOTHROW(check_plan(p, fixed));
    CHECK(p.order[0] == 0);
    CHECK(p.targets().size() == 1);
  }
}

TEST_CASE("exhaustive precedence check for short sequences") {
  for (std::size_t len = 1; len <= 5; ++len) {
    std::vector<std::size_t> order(len);
    std::iota(order.begin(), order.end(), 0);
    do {
      for (std::size_t cutoff = 0; cutoff <= len; ++cutoff) {
        auto plan = make_plan(order, cutoff);
        CHECK_NOTHROW(check_plan(plan));
        for (std::size_t j = 0; j < len; ++j) {
          for (std::size_t k = 0; k < len; ++k) {
            CHECK(plan.query_visible(j, k) == precedes(order, k, j));
            CHECK(plan.content_visible(j, k) == (j == k || precedes(order, k, j)));
          }
        }
      }
    } while (std::next_permutation(order.begin(), order.end()));
  }
}

TEST_CASE("encode_content shape, determinism and PAD invariance") {
  auto vocab = small_vocab();
  auto c = tiny_config();
  c.d_model = 32;
  c.n_heads = 4;
  c.d_head = 8;
  auto model = EncoderModel::initialize(c, vocab, 3);
  perturb(model, 4, 0.2);
  std::vector<text::TokenSequence> batch{text::tokenize("pt on vent", vocab, 16), text::tokenize("rr 18 sat 97", vocab, 16)};
  auto out = encode_content(model, batch);
  CHECK(stack_hidden(out).shape() == num::Shape{2, 16, 32});
  auto again = encode_content(model, batch);
  for (std::size_t b = 0; b < 2; ++b) {
    for (std::size_t i = 0; i < out.hidden[b].size(); ++i) CHECK(out.hidden[b].data()[i] == again.hidden[b].data()[i]);
  }

  auto mutated = batch;
  for (std::size_t i = mutated[0].true_length; i < 16; ++i) mutated[0].ids[i] = vocab.id("wean");
  auto out_mut = encode_content(model, mutated);
  const auto d = c.d_model;
  for (std::size_t i = 0; i < batch[0].true_length * d; ++i) CHECK(out.hidden[0].data()[i] == out_mut.hidden[0].data()[i]);

  auto trimmed = std::vector<text::TokenSequence>{text::trim_padding(batch[0])};
  auto out_trim = encode_content(model, trimmed);
  for (std::size_t i = 0; i < batch[0].true_length * d; ++i) CHECK(out.hidden[0].data()[i] == out_trim.hidden[0].data()[i]);

  EncodeOptions cls;
  cls.cls_only = true;
  auto out_cls = encode_content(model, batch, nullptr, cls);
  CHECK(out_cls.hidden[1].shape() == num::Shape{1, 32});
  for (std::size_t j = 0; j < d; ++j) CHECK(out_cls.hidden[1].data()[j] == out.hidden[1].data()[j]);

  auto bad = batch[0];
  bad.ids[1] = static_cast<text::TokenId>(vocab.size());
  std::vector<text::TokenSequence> bad_batch{bad};
  CHECK_THROWS_AS(encode_content(model, bad_batch), Error);
}

TEST_CASE("relative attention is invariant to absolute position shifts") {
  auto vocab = small_vocab();
  auto model = EncoderModel::initialize(tiny_config(), vocab, 9);
  perturb(model, 10);
  std::vector<text::TokenSequence> batch{text::tokenize("plan wean vent on fio2", vocab, 16)};
  auto base = encode_content(model, batch);
  for (std::int64_t shift : {1, 17, 1000}) {
    EncodeOptions o;
    o.position_offset = shift;
    auto moved = encode_content(model, batch, nullptr, o);
    for (std::size_t i = 0; i < base.hidden[0].size(); ++i) {
      CHECK(std::abs(base.hidden[0].data()[i] - moved.hidden[0].data()[i]) <= 1e-9);
    }
  }
}

TEST_CASE("recurrence memory extends the attended context") {
  auto vocab = small_vocab();
  auto c = tiny_config();
  c.mem_len = 4;
  auto model = EncoderModel::initialize(c, vocab, 12);
  perturb(model, 13);
  std::vector<text::TokenSequence> first{text::tokenize("pt on vent", vocab, 8)};
  std::vector<text::TokenSequence> second{text::tokenize("plan wean", vocab, 8)};
  auto seg1 = encode_content(model, first);
  REQUIRE(seg1.mems.size() == 1);
  CHECK(seg1.mems[0].size() == c.n_layers);
  CHECK(seg1.mems[0][0].rows() == 4);
  auto without = encode_content(model, second);
  auto with = encode_content(model, second, &seg1.mems);
  bool differs = false;
  for (std::size_t i = 0; i < with.hidden[0].size(); ++i) differs = differs || with.hidden[0].data()[i] != without.hidden[0].data()[i];
  CHECK(differs);
}

TEST_CASE("plm_forward closed forms") {
  std::vector<std::string> single{"vent vent vent"};
  auto one_token = text::Vocabulary::build(single, 1, 0);
  auto model = EncoderModel::initialize(tiny_config(), one_token, 1);
  std::vector<text::TokenSequence> batch{text::tokenize("vent vent vent", one_token, 8)};
  std::vector<std::uint8_t> fixed = fixed_positions(batch[0], one_token);
  std::vector<PermutationPlan> plans{sample_permutation(8, 5, 1.0, fixed)};
  auto out = plm_forward(model, batch, plans);
  CHECK(out.targets.size() == 3);
  for (double lp : out.log_probs.data()) CHECK(lp == 0.0);

  auto vocab = small_vocab();
  auto zeroed = EncoderModel::initialize(tiny_config(), vocab, 2);
  perturb(zeroed, 3);
  for (auto name : {"lm.w", "lm.b"}) {
    auto t = zeroed.param(name);
    std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
  }
  std::vector<text::TokenSequence> b2{text::tokenize("rr 18 sat 97 on fio2", vocab, 10)};
  auto f2 = fixed_positions(b2[0], vocab);
  std::vector<PermutationPlan> p2{sample_permutation(10, 8, 0.5, f2)};
  auto loss = plm_loss(plm_forward(zeroed, b2, p2));
  CHECK(std::abs(loss.item() - std::log(static_cast<double>(zeroed.predictable_vocab()))) < 1e-12);
}

TEST_CASE("plm_forward matches the explicit-mask reference") {
  std::vector<std::string> corpus{"a b c d", "a b"};
  auto vocab = text::Vocabulary::build(corpus, 1, 0);  // 4 tokens + 3 specials
  auto c = tiny_config(4);
  auto model = EncoderModel::initialize(c, vocab, 21);
  perturb(model, 22);
  text::TokenSequence seq = text::tokenize("b d c", vocab, 4);
  testing::ReferenceEncoder reference(model);
  std::vector<std::size_t> order{0, 1, 2, 3};
  std::size_t checked = 0;
  do {
    if (order[0] != 0) continue;  // CLS first
    auto plan = make_plan(order, 1);
    std::vector<text::TokenSequence> batch{seq};
    std::vector<PermutationPlan> plans{plan};
    auto out = plm_forward(model, batch, plans);
    auto expected = reference.plm_log_probs(seq, order, 1);
    REQUIRE(out.log_probs.size() == expected.size());
    for (std::size_t t = 0; t < expected.size(); ++t) CHECK(std::abs(out.log_probs.data()[t] - expected[t]) < 1e-12);
    ++checked;
  } while (std::next_permutation(order.begin(), order.end()));
  CHECK(checked == 6);
}

TEST_CASE("query stream does not leak permutation-future tokens") {
  auto vocab = small_vocab();
  auto model = EncoderModel::initialize(tiny_config(12), vocab, 31);
  perturb(model, 32);
  auto seq = text::tokenize("pt on vent sedated stable overnight rr 18 sat", vocab, 12);
  auto fixed = fixed_positions(seq, vocab);
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 40; ++trial) {
    auto plan = sample_permutation(12, rng(), 0.5, fixed);
    std::vector<text::TokenSequence> batch{seq};
    std::vector<PermutationPlan> plans{plan};
    auto base = plm_forward(model, batch, plans);
    const auto targets = plan.targets();
    for (std::size_t t = 0; t < targets.size(); ++t) {
      for (std::size_t pos = 1; pos < seq.true_length; ++pos) {
        if (plan.rank[pos] <= plan.rank[targets[t]]) continue;
        auto mutated = seq;
        mutated.ids[pos] = mutated.ids[pos] == vocab.id("plan") ? vocab.id("wean") : vocab.id("plan");
        std::vector<text::TokenSequence> mb{mutated};
        auto changed = plm_forward(model, mb, plans);
        CHECK(changed.log_probs.data()[t] == base.log_probs.data()[t]);
      }
    }
  }
}

TEST_CASE("plm loss gradient matches finite differences") {
  auto vocab = small_vocab();
  auto model = EncoderModel::initialize(tiny_config(10), vocab, 41);
  perturb(model, 42, 0.3);
  std::vector<text::TokenSequence> batch{text::tokenize("pt on vent sedated stable", vocab, 10),
                                         text::tokenize("plan wean vent", vocab, 10)};
  std::vector<PermutationPlan> plans;
  for (std::size_t b = 0; b < 2; ++b) plans.push_back(sample_permutation(10, 43 + b, 0.5, fixed_positions(batch[b], vocab)));
  auto params = model.parameters();
  std::vector<std::string> names;
  for (auto& [n, t] : model.named_parameters()) names.push_back(n);
  auto r = testing::gradient_check(params, names, [&] { return plm_loss(plm_forward(model, batch, plans)); });
  INFO("worst " << r.worst_tensor << " " << r.worst_relative_error);
  CHECK(r.worst_relative_error < 1e-4);
}

TEST_CASE("checkpoint round trip is bitwise exact") {
  auto vocab = small_vocab();
  auto model = EncoderModel::initialize(tiny_config(), vocab, 51);
  perturb(model, 52);
  model.set_steps(17);
  auto path = std::filesystem::temp_directory_path() / "ventcast_encoder_test.ckpt";
  model.save(path);
  auto loaded = EncoderModel::load(path);
  CHECK(loaded.checksum() == model.checksum());
  CHECK(loaded.steps() == 17);
  CHECK(loaded.vocab() == vocab);
  for (std::size_t i = 0; i < model.named_parameters().size(); ++i) {
    const auto& a = model.named_parameters()[i];
    const auto& b = loaded.named_parameters()[i];
    CHECK(a.first == b.first);
    CHECK(std::equal(a.second.data().begin(), a.second.data().end(), b.second.data().begin()));
  }
  auto bytes = io::read_file(path);
  CHECK(bytes.substr(0, 5) == "CXLN1");
  CHECK_THROWS_AS(io::deserialize(bytes.substr(0, bytes.size() - 3), kEncoderMagic), Error);

  auto names = EncoderModel::parameter_names(model.config());
  std::sort(names.begin(), names.end());
  CHECK(std::adjacent_find(names.begin(), names.end()) == names.end());
  std::filesystem::remove(path);
}

TEST_CASE("pretrain contracts") {
  auto vocab = small_vocab();
  std::vector<CorpusEntry> corpus{{"n1", "pt on vent sedated"}, {"n2", "plan wean vent"}};
  PretrainOptions opts;
  opts.steps = 0;
  opts.seed = 5;
  auto init = pretrain(corpus, vocab, tiny_config(), opts);
  CHECK(init.model.checksum() == EncoderModel::initialize(tiny_config(), vocab, 5).checksum());

  opts.steps = 5;
  opts.batch_size = 2;
  opts.lr = 1e-2;
  auto a = pretrain(corpus, vocab, tiny_config(), opts);
  auto b = pretrain(corpus, vocab, tiny_config(), opts);
  CHECK(a.loss_trace.size() == 5);
  CHECK(a.model.checksum() == b.model.checksum());
  CHECK(a.model.checksum() != init.model.checksum());

  CHECK_THROWS_AS(pretrain(corpus, vocab, tiny_config(), opts, {"n2"}), Error);
  try {
    pretrain(corpus, vocab, tiny_config(), opts, {"n1"});
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::leakage);
  }
  std::vector<CorpusEntry> empty;
  CHECK_THROWS_AS(pretrain(empty, vocab, tiny_config(), opts), Error);
}
