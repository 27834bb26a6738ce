// The conditional VAE: encode/reparameterize/decode, the taped forward pass
// with exact gradients, and conditional generation.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "rcvae/errors.hpp"
#include "rcvae/model.hpp"
#include "rcvae/trainer.hpp"
#include "test_util.hpp"

using namespace rcvae;

namespace {

RcvaeConfig toy_config() {
    RcvaeConfig c;
    c.d_x = 6;
    c.embed_dim = 3;
    c.latent_dim = 2;
    c.enc_layers = 2;
    c.dec_layers = 2;
    c.hidden = 5;
    return c;
}

void zero_params(RcvaeParams& p) {
    for (auto& ref : p.param_refs())
        if (ref.path != "embedding")
            for (double& v : ref.value->data) v = 0.0;
}

}  // namespace

TEST_CASE("config validation") {
    RcvaeConfig c = toy_config();
    c.validate();

    RcvaeConfig bad = c;
    bad.enc_layers = 1;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.hidden = 1;  // h < J
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.d_x = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("init_params shapes follow the config") {
    RcvaeConfig c = toy_config();
    Rng rng(1);
    RcvaeParams p = init_params(c, 4, rng);
    REQUIRE(p.encoder.size() == 2);
    CHECK(p.encoder[0].in_dim() == c.d_x + c.embed_dim);  // concat arithmetic
    CHECK(p.encoder[0].out_dim() == c.hidden);
    CHECK(p.encoder[1].in_dim() == c.hidden);
    CHECK(p.mu_head.out_dim() == c.latent_dim);
    CHECK(p.logvar_head.out_dim() == c.latent_dim);
    REQUIRE(p.decoder.size() == 2);
    CHECK(p.decoder[0].in_dim() == c.latent_dim + c.embed_dim);
    CHECK(p.decoder.back().out_dim() == c.d_x);
    CHECK(p.decoder.back().activation == Activation::Sigmoid);
    CHECK(p.embedding.rows == 4);
    CHECK(p.embedding.cols == c.embed_dim);

    // param_refs covers encoder pairs, two heads, decoder pairs, embedding
    CHECK(p.param_refs().size() == 2 * 2 + 4 + 2 * 2 + 1);
}

TEST_CASE("zero network pins mu, logvar and the sigmoid midpoint") {
    RcvaeConfig c = toy_config();
    Rng rng(2);
    RcvaeParams p = init_params(c, 2, rng);
    zero_params(p);

    Matrix x(c.d_x, 3, 0.7);
    Matrix v = gather_embeddings(p.embedding, {0, 1, 0});
    LatentStats stats = encode(p, x, v);
    for (double m : stats.mu.data) CHECK(m == 0.0);
    for (double lv : stats.logvar.data) CHECK(lv == 0.0);

    Matrix z(c.latent_dim, 3, 0.0);
    Matrix xhat = decode(p, z, v);
    for (double o : xhat.data) CHECK(o == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("encode and decode are pure") {
    RcvaeConfig c = toy_config();
    Rng rng(3);
    RcvaeParams p = init_params(c, 3, rng);
    Matrix x = rng.normal_matrix(c.d_x, 2);
    Matrix v = gather_embeddings(p.embedding, {1, 2});
    LatentStats s1 = encode(p, x, v);
    LatentStats s2 = encode(p, x, v);
    CHECK(s1.mu.data == s2.mu.data);
    CHECK(s1.logvar.data == s2.logvar.data);

    Matrix z = rng.normal_matrix(c.latent_dim, 2);
    CHECK(decode(p, z, v).data == decode(p, z, v).data);

    Matrix wrong(c.d_x + 1, 2, 0.0);
    CHECK_THROWS_AS(encode(p, wrong, v), DimensionError);
}

TEST_CASE("reparameterize pinned values") {
    LatentStats stats;
    stats.mu = Matrix::column({1, 2});
    stats.logvar = Matrix::column({0, 0});
    Matrix eps = Matrix::column({0.5, -0.5});
    Matrix z = reparameterize(stats, eps);
    CHECK(z.at(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(z.at(1, 0) == doctest::Approx(1.5).epsilon(1e-15));

    // eps = 0 -> z = mu exactly
    Matrix zero(2, 1, 0.0);
    Matrix z0 = reparameterize(stats, zero);
    CHECK(z0.data == stats.mu.data);

    // strongly negative (clamped) logvar -> sigma = e^-10, z barely moves
    LatentStats tight;
    tight.mu = Matrix::column({3, -3});
    tight.logvar = Matrix::column({-20, -20});
    Matrix big = Matrix::column({100, -100});
    Matrix zt = reparameterize(tight, big);
    double sigma = std::exp(-10.0);
    CHECK(zt.at(0, 0) == doctest::Approx(3.0 + 100 * sigma).epsilon(1e-12));
    CHECK(zt.at(1, 0) == doctest::Approx(-3.0 - 100 * sigma).epsilon(1e-12));
    CHECK(std::abs(zt.at(0, 0) - 3.0) < 5e-3);
}

TEST_CASE("decode output stays strictly inside (0,1)") {
    RcvaeConfig c = toy_config();
    Rng rng(5);
    RcvaeParams p = init_params(c, 2, rng);
    Matrix z = scale(rng.normal_matrix(c.latent_dim, 8), 5.0);
    Matrix v = gather_embeddings(p.embedding, {0, 1, 0, 1, 0, 1, 0, 1});
    Matrix xhat = decode(p, z, v);
    CHECK(xhat.rows == c.d_x);
    for (double o : xhat.data) {
        CHECK(o > 0.0);
        CHECK(o < 1.0);
    }
}

TEST_CASE("forward with zero eps equals decoding the mean") {
    RcvaeConfig c = toy_config();
    Rng rng(6);
    RcvaeParams p = init_params(c, 2, rng);
    Matrix x = rng.normal_matrix(c.d_x, 2);
    std::vector<std::size_t> idx{0, 1};
    Matrix eps(c.latent_dim, 2, 0.0);
    ForwardResult res = forward(p, x, idx, eps);

    Matrix v = gather_embeddings(p.embedding, idx);
    LatentStats stats = encode(p, x, v);
    Matrix manual = decode(p, stats.mu, v);
    CHECK(res.xhat.data == manual.data);
    CHECK(res.z.data == stats.mu.data);
}

TEST_CASE("forward is a pure function of (params, x, label, eps)") {
    RcvaeConfig c = toy_config();
    Rng rng(7);
    RcvaeParams p = init_params(c, 2, rng);
    Matrix x = rng.normal_matrix(c.d_x, 3);
    std::vector<std::size_t> idx{0, 1, 1};
    Matrix eps = rng.normal_matrix(c.latent_dim, 3);
    ForwardResult a = forward(p, x, idx, eps);
    ForwardResult b = forward(p, x, idx, eps);
    CHECK(a.xhat.data == b.xhat.data);
    CHECK(a.stats.mu.data == b.stats.mu.data);
}

TEST_CASE("different labels give different reconstructions") {
    RcvaeConfig c = toy_config();
    Rng rng(8);
    RcvaeParams p = init_params(c, 2, rng);
    // orthogonal, clearly distinct condition rows
    p.embedding = Matrix(2, c.embed_dim, 0.0);
    p.embedding.at(0, 0) = 1.0;
    p.embedding.at(1, 1) = -1.0;

    Matrix x = rng.normal_matrix(c.d_x, 1);
    Matrix eps(c.latent_dim, 1, 0.0);
    ForwardResult a = forward(p, x, {0}, eps);
    ForwardResult b = forward(p, x, {1}, eps);
    double diff = 0;
    for (std::size_t i = 0; i < a.xhat.size(); ++i)
        diff = std::max(diff, std::abs(a.xhat.data[i] - b.xhat.data[i]));
    CHECK(diff > 1e-8);
}

TEST_CASE("model gradients match finite differences on toy configs") {
    int done = 0;
    std::uint64_t seed = 500;
    while (done < 5) {
        Rng rng(seed++);
        RcvaeConfig c;
        c.d_x = 4 + rng.next_below(4);
        c.embed_dim = 2 + rng.next_below(3);
        c.latent_dim = 2 + rng.next_below(2);
        c.enc_layers = 2 + rng.next_below(3);
        c.dec_layers = 2 + rng.next_below(3);
        c.hidden = c.latent_dim + 2 + rng.next_below(4);
        std::size_t batch = 1 + rng.next_below(3);
        std::size_t vocab = 2 + rng.next_below(2);

        RcvaeParams p = init_params(c, vocab, rng);
        Matrix x(c.d_x, batch);
        for (double& v : x.data) v = rng.next_unit();
        std::vector<std::size_t> idx;
        for (std::size_t b = 0; b < batch; ++b) idx.push_back(rng.next_below(vocab));
        Matrix eps = rng.normal_matrix(c.latent_dim, batch);

        double worst = testutil::model_grad_worst_rel_err(p, x, idx, eps);
        if (worst < 0) continue;  // kink proximity, re-roll
        CHECK(worst < 1e-5);
        ++done;
    }
}

TEST_CASE("embedding gradient is row-sparse") {
    RcvaeConfig c = toy_config();
    Rng rng(30);
    RcvaeParams p = init_params(c, 4, rng);
    Matrix x(c.d_x, 2);
    for (double& v : x.data) v = rng.next_unit();
    Matrix eps = rng.normal_matrix(c.latent_dim, 2);
    // batch touches rows 1 and 3 only
    ForwardResult res = forward(p, x, {1, 3}, eps);
    std::vector<Matrix> grads = backward(p, res, x);
    const Matrix& eg = grads.back();  // embedding is the last param ref
    REQUIRE(eg.rows == 4);
    for (std::size_t col = 0; col < eg.cols; ++col) {
        CHECK(eg.at(0, col) == 0.0);
        CHECK(eg.at(2, col) == 0.0);
    }
    double touched = 0;
    for (std::size_t col = 0; col < eg.cols; ++col)
        touched += std::abs(eg.at(1, col)) + std::abs(eg.at(3, col));
    CHECK(touched > 0.0);
}

TEST_CASE("generate honors shape, range, determinism and the matcher") {
    RcvaeConfig c = toy_config();
    Rng rng(9);
    RcvaeParams p = init_params(c, 2, rng);
    LabelVocab vocab = LabelVocab::build({{800, 20}, {600, 20}});

    Rng g1(77), g2(77);
    LabelKey matched;
    Matrix out = generate(p, vocab, {805, 22}, 3, g1, 0.5, &matched);
    CHECK(out.rows == c.d_x);
    CHECK(out.cols == 3);
    for (double v : out.data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
    // 0.5*5+0.5*2 = 3.5 beats 0.5*205+0.5*2 = 103.5
    CHECK(matched == LabelKey{800, 20});

    Matrix again = generate(p, vocab, {805, 22}, 3, g2, 0.5);
    CHECK(out.data == again.data);

    // in-vocab query short-circuits to itself
    generate(p, vocab, {600, 20}, 1, g1, 0.5, &matched);
    CHECK(matched == LabelKey{600, 20});

    LabelVocab empty;
    CHECK_THROWS_AS(generate(p, empty, {805, 22}, 1, g1, 0.5), StateError);
}
