#include <cmath>
#include <random>

#include "famebias/bias.hpp"
#include "test_util.hpp"

using namespace famebias;
using famebias::testing::TempDir;

namespace {

EmbeddingSequence prompt_seq() {
  // "photo of a doctor"
  return EmbeddingSequence({"photo", "of", "a", "doctor"},
                           Matrix(4, 2, {1, 0, 0, 1, 0.5f, 0.5f, 2, 4}));
}

AttackConfig doctor_config(Matrix target, double alpha = 1.5, double beta = 0.3) {
  AttackConfig c;
  c.trigger = TriggerPattern::from_phrase("doctor");
  c.target_name = "Barack Obama";
  c.target_source = std::move(target);
  c.alpha = alpha;
  c.beta = beta;
  return c;
}

}  // namespace

TEST(Blend, DefaultWeights) {
  const Vector out = blend(Vector{10, 0}, Vector{2, 4}, 1.5, 0.3);
  EXPECT_FLOAT_EQ(out[0], 15.6f);
  EXPECT_FLOAT_EQ(out[1], 1.2f);
}

TEST(Blend, IdentityAndSubstitutionAreBitExact) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> n;
  for (int i = 0; i < 100; ++i) {
    Vector a(8), b(8);
    for (auto& x : a) x = n(rng);
    for (auto& x : b) x = n(rng);
    EXPECT_TRUE(bit_equal(blend(a, b, 0.0, 1.0), b));
    EXPECT_TRUE(bit_equal(blend(a, b, 1.0, 0.0), a));
  }
}

TEST(Blend, WeightValidation) {
  EXPECT_ERRC(blend(Vector{1}, Vector{1}, 0.0, 0.0), Errc::invariant_violation);
  EXPECT_ERRC(blend(Vector{1}, Vector{1}, -1.0, 1.0), Errc::invariant_violation);
  EXPECT_ERRC(blend(Vector{1}, Vector{1}, NAN, 1.0), Errc::invariant_violation);
  EXPECT_ERRC(blend(Vector{1, 2}, Vector{1}, 1.0, 1.0), Errc::dim_mismatch);
}

TEST(Pooling, Modes) {
  const Matrix target(2, 2, {1, 2, 3, 6});
  EXPECT_TRUE(pool_target(target, Pooling::mean, 1) == Matrix(1, 2, {2, 4}));
  EXPECT_TRUE(pool_target(target, Pooling::first, 1) == Matrix(1, 2, {1, 2}));
  EXPECT_TRUE(pool_target(target, Pooling::positional, 2) == target);
  EXPECT_ERRC(pool_target(target, Pooling::positional, 1), Errc::positional_length_mismatch);
}

TEST(Attack, ReplacesOnlyTriggerPositions) {
  const auto seq = prompt_seq();
  const auto out = apply_attack(seq, doctor_config(Matrix(1, 2, {10, 0})));
  ASSERT_EQ(out.modified_spans.size(), 1u);
  EXPECT_EQ(out.modified_spans[0], (SpanRef{3, 4}));
  for (std::size_t r = 0; r < 3; ++r) EXPECT_TRUE(bit_equal(out.sequence.vectors().row(r), seq.vectors().row(r)));
  EXPECT_FLOAT_EQ(out.sequence.vectors().row(3)[0], 15.6f);
  EXPECT_FLOAT_EQ(out.sequence.vectors().row(3)[1], 1.2f);
  EXPECT_EQ(out.sequence.tokens(), seq.tokens());
}

TEST(Attack, MatchesCaseInsensitively) {
  EmbeddingSequence seq({"A", "Doctor"}, Matrix(2, 1, {1, 2}));
  EXPECT_EQ(apply_attack(seq, doctor_config(Matrix(1, 1, {0}))).modified_spans.size(), 1u);
}

TEST(Attack, NoTriggerLeavesSequenceUnchanged) {
  EmbeddingSequence seq({"a", "chef"}, Matrix(2, 1, {1, 2}));
  const auto out = apply_attack(seq, doctor_config(Matrix(1, 1, {0})));
  EXPECT_TRUE(out.modified_spans.empty());
  EXPECT_TRUE(out.sequence == seq);
}

TEST(Attack, PositionalPairsRows) {
  EmbeddingSequence seq({"police", "officer", "x"}, Matrix(3, 1, {1, 1, 1}));
  auto c = doctor_config(Matrix(2, 1, {10, 20}), 1.0, 1.0);
  c.trigger = TriggerPattern::from_phrase("police officer");
  c.pooling = Pooling::positional;
  const auto out = apply_attack(seq, c);
  EXPECT_TRUE(out.sequence.vectors() == Matrix(3, 1, {11, 21, 1}));
  c.target_source = Matrix(3, 1, {1, 2, 3});
  EXPECT_ERRC(apply_attack(seq, c), Errc::positional_length_mismatch);
}

TEST(Attack, DimMismatch) {
  EXPECT_ERRC(apply_attack(prompt_seq(), doctor_config(Matrix(1, 3, {1, 2, 3}))), Errc::dim_mismatch);
}

TEST(Attack, ExplicitSpans) {
  const auto seq = prompt_seq();
  const auto c = doctor_config(Matrix(1, 2, {0, 0}), 0.0, 2.0);
  const auto out = apply_attack_at(seq, c, {{2, 3}, {0, 1}});
  EXPECT_EQ(out.modified_spans, (std::vector<SpanRef>{{0, 1}, {2, 3}}));
  EXPECT_EQ(out.sequence.vectors().row(0)[0], 2.0f);
  EXPECT_ERRC(apply_attack_at(seq, c, {{0, 2}, {1, 3}}), Errc::span_out_of_range);
  EXPECT_ERRC(apply_attack_at(seq, c, {{3, 5}}), Errc::span_out_of_range);
}

TEST(Direction, ShiftsByGammaTimesDifference) {
  EmbeddingTable table(2);
  table.insert("men", {1, 0});
  table.insert("women", {0, 1});
  auto c = doctor_config(Matrix(1, 2, {0, 0}), 1.0, 1.0);
  c.directions.push_back({std::string("men"), std::string("women"), 0.5});
  const auto out = apply_attack(prompt_seq(), c, &table);
  EXPECT_FLOAT_EQ(out.sequence.vectors().row(3)[0], 1.5f);
  EXPECT_FLOAT_EQ(out.sequence.vectors().row(3)[1], 4.5f);
  EXPECT_ERRC(apply_attack(prompt_seq(), c), Errc::unknown_token);
}

TEST(Direction, ZeroGammaIsExactNoOp) {
  auto c = doctor_config(Matrix(1, 2, {0.1f, 0.7f}));
  const auto plain = apply_attack(prompt_seq(), c);
  c.directions.push_back({Vector{1, 2}, Vector{3, 9}, 0.0});
  EXPECT_TRUE(apply_attack(prompt_seq(), c).sequence == plain.sequence);
  c.directions.back().plus = Vector{1, 2, 3};
  EXPECT_ERRC(apply_attack(prompt_seq(), c), Errc::dim_mismatch);
}

TEST(Target, HarvestFromCarrierContainer) {
  TempDir tmp;
  EmbeddingSequence carrier({"barack", "obama", "smiling"}, Matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  write_container(carrier, tmp.path() / "carrier.fbeb");
  auto c = doctor_config(Matrix(), 1.0, 0.0);
  c.target_source = ContainerTarget{tmp.path() / "carrier.fbeb", {0, 2}};
  const auto out = apply_attack(prompt_seq(), c);
  EXPECT_TRUE(bit_equal(out.sequence.vectors().row(3), Vector{2, 3}));
  c.target_source = ContainerTarget{tmp.path() / "carrier.fbeb", {2, 4}};
  EXPECT_ERRC(apply_attack(prompt_seq(), c), Errc::span_out_of_range);
}

TEST(Config, Validate) {
  auto c = doctor_config(Matrix(1, 1, {1}));
  EXPECT_NO_THROW(c.validate());
  c.trigger.tokens.clear();
  EXPECT_ERRC(c.validate(), Errc::invariant_violation);
  EXPECT_ERRC(parse_pooling("max"), Errc::config_error);
}
