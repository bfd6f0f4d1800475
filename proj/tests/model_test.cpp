#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "loyalty/errors.hpp"
#include "loyalty/model/checkpoint.hpp"
#include "loyalty/model/classifier.hpp"
#include "loyalty/nn/int8.hpp"
#include "loyalty/nn/ops.hpp"

using namespace loyalty;
using namespace loyalty::model;

namespace {

ModelConfig small_config(std::size_t layers = 4) {
    ModelConfig c;
    c.vocab_size = 50;
    c.hidden = 16;
    c.heads = 4;
    c.layers = layers;
    c.ffn = 32;
    c.max_length = 12;
    c.num_classes = 3;
    return c;
}

std::vector<TokenId> random_ids(Rng& rng, std::size_t vocab, std::size_t max_len) {
    const std::size_t n = 1 + uniform_index(rng, max_len);
    std::vector<TokenId> ids(n);
    for (auto& id : ids) id = uniform_index(rng, vocab);
    return ids;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("loyalty_model_test_" + name);
}

}  // namespace

TEST(Tokenizer, BuildIsOrderIndependentWithLexicographicTies) {
    std::vector<std::string> a{"b a c", "a b", "d"};
    std::vector<std::string> b{"d", "a b", "b a c"};
    const auto ta = Tokenizer::build(a, 100, 10);
    const auto tb = Tokenizer::build(b, 100, 10);
    EXPECT_EQ(ta, tb);
    // a, b appear twice; c, d once; ties broken lexicographically.
    EXPECT_EQ(ta.vocab(), (std::vector<std::string>{"[pad]", "[unk]", "[cls]", "[sep]", "a", "b",
                                                     "c", "d"}));
}

TEST(Tokenizer, EncodeStaysInVocabularyAndLowercases) {
    const std::vector<std::string> corpus{"The cat [SEP] sat"};
    const auto tok = Tokenizer::build(corpus, 6, 4);
    const auto ids = tok.encode("THE cat [sep] dog on mat");
    ASSERT_EQ(ids.size(), 4u);
    EXPECT_EQ(ids[0], Tokenizer::kCls);
    EXPECT_EQ(ids[3], Tokenizer::kSep);
    for (auto id : ids) EXPECT_LT(id, tok.size());
    EXPECT_EQ(tok.encode("zebra")[1], Tokenizer::kUnk);
}

TEST(Tokenizer, JsonRoundTrip) {
    const std::vector<std::string> corpus{"x y z", "y"};
    const auto tok = Tokenizer::build(corpus, 100, 8);
    EXPECT_EQ(Tokenizer::from_json(tok.to_json()), tok);
}

TEST(Model, ConfigValidation) {
    auto c = small_config();
    c.hidden = 15;
    Rng rng(0);
    EXPECT_THROW(ClassifierModel::random(c, rng), InvalidInput);
    c = small_config(0);
    EXPECT_THROW(ClassifierModel::random(c, rng), InvalidInput);
}

TEST(Model, ForwardShapes) {
    Rng rng(1);
    const auto m = ClassifierModel::random(small_config(4), rng);
    nn::Tape tape(nn::Tape::Mode::inference);
    const std::vector<TokenId> ids{2, 7, 9, 3, 11};
    const auto r = forward(m, tape, ids);
    EXPECT_EQ(r.hidden.size(), 4u);
    EXPECT_EQ(r.logits.value().size(), 3u);
    EXPECT_EQ(r.hidden[0].value().rows(), ids.size());
}

TEST(Model, ForwardRejectsBadInput) {
    Rng rng(1);
    const auto m = ClassifierModel::random(small_config(), rng);
    EXPECT_THROW(logits(m, std::vector<TokenId>{}), InvalidInput);
    EXPECT_THROW(logits(m, std::vector<TokenId>{2, 50}), InvalidInput);
    EXPECT_THROW(logits(m, std::vector<TokenId>(13, 4)), InvalidInput);
}

TEST(Model, ForwardIsBitDeterministic) {
    Rng rng(2);
    const auto m = ClassifierModel::random(small_config(), rng);
    const std::vector<TokenId> ids{2, 5, 6, 7};
    EXPECT_EQ(logits(m, ids), logits(m, ids));
}

TEST(Model, ClosedGatesRemoveAttentionEntirely) {
    Rng rng(3);
    auto m = ClassifierModel::random(small_config(1), rng);
    for (std::size_t h = 0; h < 4; ++h) m.set_gate(0, h, 0.0);
    const std::vector<TokenId> ids{2, 8, 9, 10};

    // Expected residual stream: x + FFN(LN(x)) with no attention term.
    nn::Tape tape(nn::Tape::Mode::inference);
    const auto& layer = m.layers()[0];
    std::vector<std::size_t> pos{0, 1, 2, 3};
    nn::Var x = nn::add(nn::embedding(tape.param(m.token_embedding()), ids),
                        nn::embedding(tape.param(m.position_embedding()), pos));
    nn::Var h = nn::layer_norm(x, tape.param(layer.ffn_norm.gain), tape.param(layer.ffn_norm.bias));
    h = nn::add_row(nn::matmul(h, tape.param(layer.ffn_in.weight)), tape.param(layer.ffn_in.bias));
    h = nn::add_row(nn::matmul(nn::gelu(h), tape.param(layer.ffn_out.weight)),
                    tape.param(layer.ffn_out.bias));
    const nn::Tensor expected = nn::add(x, h).value();

    nn::Tape t2(nn::Tape::Mode::inference);
    EXPECT_EQ(forward(m, t2, ids).hidden[0].value(), expected);

    // Head weights no longer matter.
    const auto before = logits(m, ids);
    for (double& v : m.layers()[0].heads[1].query.weight.value.values()) v += 1.0;
    EXPECT_EQ(logits(m, ids), before);
}

TEST(Model, GateChangesLogitsAndIsIdempotent) {
    Rng rng(4);
    auto m = ClassifierModel::random(small_config(), rng);
    const std::vector<TokenId> ids{2, 5, 9, 14, 20};
    const auto original = logits(m, ids);
    m.set_gate(1, 2, 0.0);
    const auto pruned = logits(m, ids);
    EXPECT_NE(pruned, original);
    m.set_gate(1, 2, 0.0);
    EXPECT_EQ(logits(m, ids), pruned);
    EXPECT_EQ(m.active_heads(), 15u);
    EXPECT_THROW(m.set_gate(1, 2, 0.5), InvalidInput);
}

TEST(Truncate, FullDepthIsIdentity) {
    Rng rng(5);
    const auto m = ClassifierModel::random(small_config(), rng);
    const auto t = truncate(m, 4);
    for (int i = 0; i < 20; ++i) {
        const auto ids = random_ids(rng, 50, 12);
        EXPECT_EQ(logits(t, ids), logits(m, ids));
    }
}

TEST(Truncate, KeepsFirstLayersAndHead) {
    Rng rng(6);
    const auto m = ClassifierModel::random(small_config(), rng);
    const auto t = truncate(m, 2);
    EXPECT_EQ(t.num_layers(), 2u);
    EXPECT_EQ(t.config().layers, 2u);
    EXPECT_NE(t.provenance().find("truncate"), std::string::npos);
    std::vector<const TransformerLayer*> first{&m.layers()[0], &m.layers()[1]};
    ForwardOptions opts;
    opts.layer_override = &first;
    for (int i = 0; i < 20; ++i) {
        const auto ids = random_ids(rng, 50, 12);
        nn::Tape tape(nn::Tape::Mode::inference);
        EXPECT_EQ(logits(t, ids), forward(m, tape, ids, opts).logits.value().storage());
    }
    EXPECT_THROW(truncate(m, 5), InvalidInput);
    EXPECT_THROW(truncate(m, 0), InvalidInput);
}

TEST(Checkpoint, RoundTripReproducesLogits) {
    Rng rng(7);
    auto m = ClassifierModel::random(small_config(), rng);
    m.set_gate(0, 1, 0.0);
    m.set_gate(3, 3, 0.0);
    m.set_provenance("teacher");
    const auto path = temp_path("roundtrip.ckpt");
    save(m, path);
    const auto loaded = load(path);
    for (int i = 0; i < 100; ++i) {
        const auto ids = random_ids(rng, 50, 12);
        EXPECT_EQ(logits(loaded, ids), logits(m, ids));
    }
    for (std::size_t l = 0; l < 4; ++l) EXPECT_EQ(loaded.layers()[l].gates, m.layers()[l].gates);
    EXPECT_EQ(loaded.provenance(), "teacher");
    std::filesystem::remove(path);
}

TEST(Checkpoint, QuantizedLayersSurvive) {
    Rng rng(8);
    auto m = ClassifierModel::random(small_config(2), rng);
    m.for_each_linear([](const std::string&, Linear& lin) {
        lin.quant = nn::quantize_weights(lin.weight.value);
    });
    m.set_int8_final(true);
    const auto loaded = deserialize(serialize(m));
    EXPECT_TRUE(loaded.int8_final());
    EXPECT_EQ(loaded.layers()[1].ffn_in.quant, m.layers()[1].ffn_in.quant);
    const std::vector<TokenId> ids{2, 4, 6};
    EXPECT_EQ(logits(loaded, ids), logits(m, ids));
}

TEST(Checkpoint, WrongMagicIsFormatError) {
    Rng rng(9);
    std::string bytes = serialize(ClassifierModel::random(small_config(1), rng));
    bytes[0] = 'X';
    try {
        deserialize(bytes);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_EQ(e.byte_offset(), 0u);
    }
}

TEST(Checkpoint, TruncatedFileReportsOffset) {
    Rng rng(10);
    const std::string bytes = serialize(ClassifierModel::random(small_config(1), rng));
    for (std::size_t cut : {std::size_t{4}, std::size_t{15}, bytes.size() / 2, bytes.size() - 1}) {
        try {
            deserialize(bytes.substr(0, cut));
            FAIL() << "expected FormatError at cut " << cut;
        } catch (const FormatError& e) {
            ASSERT_TRUE(e.byte_offset().has_value());
            EXPECT_LE(*e.byte_offset(), cut);
        }
    }
    EXPECT_THROW(load(temp_path("does_not_exist.ckpt")), IoError);
}

TEST(Model, InferenceTimeGrowsWithDepth) {
    ModelConfig c;
    c.vocab_size = 200;
    Rng rng(11);
    std::vector<TokenId> ids(24);
    for (auto& id : ids) id = 4 + uniform_index(rng, 190);
    auto time_layers = [&](std::size_t layers) {
        c.layers = layers;
        const auto m = ClassifierModel::random(c, rng);
        std::vector<double> runs;
        for (int i = 0; i < 15; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            for (int k = 0; k < 5; ++k) logits(m, ids);
            runs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        std::sort(runs.begin(), runs.end());
        return runs[runs.size() / 2];
    };
    const double t1 = time_layers(1), t2 = time_layers(2), t4 = time_layers(4);
    EXPECT_LE(t1, t2 * 1.2);
    EXPECT_LE(t2, t4 * 1.2);
}
