#include <stdexcept>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "gradcheck.hpp"
#include "sist/checkpoint.hpp"
#include "sist/dataset.hpp"
#include "sist/model.hpp"

using namespace sist;
using namespace sist::nn;
using T = Tensor<double>;

namespace {

// Small enough for double-precision finite differences of the whole graph.
SistConfig small_config() {
  SistConfig c;
  c.embed_dim = 16;
  c.heads = 2;
  c.encoder_layers = 1;
  c.mlp_hidden = 24;
  c.image_size = 32;
  c.noise_channels = 2;
  c.tail_hidden = 4;
  c.recon_hidden = 4;
  c.unet_base = 4;
  return c;
}

Sample small_sample(const SistConfig& c, int index = 0) {
  DatasetSpec spec;
  spec.count = 1;
  spec.geometry = c.geometry;
  spec.image_size = c.image_size;
  return make_sample(spec, index);
}

template <typename P>
void zero_prefix(ParamStore<P>& store, const std::string& prefix) {
  for (auto& [name, t] : store.entries())
    if (name.rfind(prefix, 0) == 0) std::fill(t.mutable_values().begin(), t.mutable_values().end(), P(0));
}

template <typename P>
void randomize_prefix(ParamStore<P>& store, const std::string& prefix, std::uint64_t seed, double bound) {
  for (auto& [name, t] : store.entries())
    if (name.rfind(prefix, 0) == 0) {
      const auto v = gradcheck::uniform(t.size(), seed++, -bound, bound);
      std::transform(v.begin(), v.end(), t.mutable_values().begin(), [](double x) { return P(x); });
    }
}

bool same_values(const T& a, const T& b) {
  return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

std::vector<double> rows_permuted(const T& t, const std::vector<int>& perm) {
  const int cols = t.dim(1);
  std::vector<double> out;
  for (int p : perm) out.insert(out.end(), t.values().begin() + p * cols, t.values().begin() + (p + 1) * cols);
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("configuration") {
  CHECK_NOTHROW(SistConfig::desk().validate());
  const SistConfig full = SistConfig::full();
  CHECK_NOTHROW(full.validate());
  CHECK(full.heads == 6);
  CHECK(full.encoder_layers == 6);
  CHECK(full.head_layers == 2);
  CHECK(full.embed_dim % full.heads == 0);

  SistConfig bad = SistConfig::desk();
  bad.embed_dim = 66;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = SistConfig::desk();
  bad.image_size = 62;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = SistConfig::desk();
  bad.weight_local = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  SistConfig c = small_config();
  c.pre_norm = true;
  c.weight_global = 0.25;
  c.seed = 1234567890123ULL;
  KeyValues kv;
  c.write(kv);
  CHECK(SistConfig::read(KeyValues::parse(kv.serialize())) == c);
}

TEST_CASE("output shapes and positional embeddings") {
  const SistConfig c = SistConfig::desk();
  const SistModel<float> model(c);
  const Sample s = small_sample(c);
  const auto out = model.forward(as_tensor<float>(s.s_ld), as_tensor<float>(s.i_ld));
  CHECK(out.s_hat.shape() == Shape{36, 33});
  CHECK(out.i_noise.shape() == Shape{64, 64});
  CHECK(out.i_hat.shape() == Shape{64, 64});
  CHECK(model.positional_embedding().shape() == Shape{36, 64});
  CHECK_THROWS_AS(model.st_head(Tensor<float>::zeros({36, 31})), std::invalid_argument);
  std::set<std::string> names;
  for (const auto& e : model.params().entries()) names.insert(e.first);
  CHECK(names.size() == model.params().entries().size());
}

TEST_CASE("head") {
  const SistModel<double> model(small_config());
  const T zero = model.st_head(T::zeros({36, 33}));
  CHECK(zero.shape() == Shape{36, 16});
  for (double v : zero.values()) CHECK(v == 0.0);

  auto values = gradcheck::uniform(36 * 33, 1, 0, 2);
  std::copy(values.begin() + 5 * 33, values.begin() + 6 * 33, values.begin() + 20 * 33);
  const T h = model.st_head(T({36, 33}, values));
  CHECK(std::equal(h.values().begin() + 5 * 16, h.values().begin() + 6 * 16, h.values().begin() + 20 * 16));
}

TEST_CASE("encoder") {
  SistModel<double> model(small_config());
  const T h = gradcheck::random_tensor({36, 16}, 2);
  SUBCASE("zero attention and MLP weights leave H plus positions") {
    zero_prefix(model.params(), "encoder.layer");
    const T z = model.st_encoder(h);
    CHECK(z.shape() == Shape{36, 16});
    const T expected = add(h, model.positional_embedding());
    for (std::size_t k = 0; k < z.size(); ++k) CHECK(z.values()[k] == doctest::Approx(expected.values()[k]).epsilon(1e-14));
  }
  SUBCASE("without positions the encoder is permutation equivariant") {
    zero_prefix(model.params(), "encoder.positional");
    std::vector<int> perm(36);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), std::mt19937_64(3));
    const T z = model.st_encoder(h);
    const T zp = model.st_encoder(T({36, 16}, rows_permuted(h, perm)));
    const auto expected = rows_permuted(z, perm);
    for (std::size_t k = 0; k < expected.size(); ++k) CHECK(zp.values()[k] == doctest::Approx(expected[k]).epsilon(1e-12));
  }
}

TEST_CASE("tail") {
  SistConfig c = small_config();
  SistModel<double> model(c);
  c.tail_blocks = 0;
  const SistModel<double> plain(c);
  const T z = gradcheck::random_tensor({36, 16}, 4);
  const T h = gradcheck::random_tensor({36, 16}, 5);
  CHECK(model.st_tail(z, h).shape() == Shape{36, 33});
  zero_prefix(model.params(), "tail.block");
  CHECK(same_values(model.st_tail(z, h), plain.st_tail(z, h)));
}

TEST_CASE("noise transfer") {
  const SistModel<double> model(small_config());
  const T s = gradcheck::random_tensor({36, 33}, 6, 0, 1);
  const T zero = model.noise_to_image(s, s);
  CHECK(zero.shape() == Shape{32, 32});
  for (double v : zero.values()) CHECK(v == 0.0);

  const T s_hat = gradcheck::random_tensor({36, 33}, 7, 0, 1);
  sum(mul(model.noise_to_image(s, s_hat), model.noise_to_image(s, s_hat))).backward();
  auto nonzero = [](std::span<const double> g) {
    return std::any_of(g.begin(), g.end(), [](double v) { return v != 0.0; });
  };
  CHECK(nonzero(s_hat.grad()));
  CHECK(nonzero(model.params().find("recon.embed.weight")->grad()));
  CHECK(nonzero(model.params().find("recon.view_to_image.weight")->grad()));
}

TEST_CASE("refinement starts at the identity") {
  const SistModel<double> model(small_config());
  const T i_ld = gradcheck::random_tensor({32, 32}, 8);
  const T out = model.refine_image(i_ld, T::zeros({32, 32}));
  CHECK(same_values(out, i_ld));
  CHECK_THROWS_AS(model.refine_image(T::zeros({16, 16}), T::zeros({16, 16})), std::invalid_argument);
}

TEST_CASE("total loss") {
  const SistConfig c = small_config();
  const SistModel<double> model(c);
  const Sample s = small_sample(c);
  const T s_nd = as_tensor<double>(s.s_nd), i_nd = as_tensor<double>(s.i_nd), i_ld = as_tensor<double>(s.i_ld);
  const SistOutputs<double> perfect{s_nd, sub(i_ld, i_nd), i_nd};
  LossTerms terms;
  const double best = model.total_loss(perfect, s_nd, i_nd, i_ld, &terms).item();
  CHECK(best <= std::sqrt(kLocalLossEpsilon) + 1e-12);

  const auto out = model.forward(as_tensor<double>(s.s_ld), i_ld);
  const double total = model.total_loss(out, s_nd, i_nd, i_ld, &terms).item();
  const double by_hand = l1_loss(out.s_hat, s_nd).item() + sisl(std::span<const double>(out.s_hat.values()), s.s_nd.values, model.conjugate_map()).value +
                         l1_loss(out.i_hat, i_nd).item() + l1_loss(out.i_noise, sub(i_ld, i_nd)).item();
  CHECK(std::abs(total - by_hand) <= 1e-10);
  CHECK(std::abs(total - (terms.sino + terms.sisl + terms.image + terms.noise)) <= 1e-10);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const T noise = gradcheck::random_tensor({36, 33}, 100 + seed, -0.01, 0.01);
    const SistOutputs<double> moved{add(s_nd, noise), perfect.i_noise, perfect.i_hat};
    CHECK(model.total_loss(moved, s_nd, i_nd, i_ld).item() > best);
  }
}

TEST_CASE("end-to-end gradient") {
  const SistConfig c = small_config();
  SistModel<double> model(c);
  // The zero-initialized U-Net head would hide every refinement gradient, and
  // zero biases put zero-padded activations exactly on the ReLU kink.
  randomize_prefix(model.params(), "refine.unet.head", 50, 0.1);
  std::uint64_t bias_seed = 500;
  for (auto& [name, t] : model.params().entries())
    if (name.size() > 5 && name.compare(name.size() - 5, 5, ".bias") == 0) {
      const auto v = gradcheck::uniform(t.size(), bias_seed++, -0.05, 0.05);
      std::copy(v.begin(), v.end(), t.mutable_values().begin());
    }
  const Sample s = small_sample(c, 1);
  const T s_ld = as_tensor<double>(s.s_ld), s_nd = as_tensor<double>(s.s_nd);
  const T i_ld = as_tensor<double>(s.i_ld), i_nd = as_tensor<double>(s.i_nd);
  auto loss = [&] { return model.total_loss(model.forward(s_ld, i_ld), s_nd, i_nd, i_ld); };

  model.params().zero_grad();
  loss().backward();
  auto& entries = model.params().entries();
  std::mt19937_64 rng(11);
  double worst = 0.0;
  std::string where;
  for (int n = 0; n < 30; ++n) {
    auto& [name, t] = entries[rng() % entries.size()];
    const std::size_t k = rng() % t.size();
    const double analytic = t.grad().empty() ? 0.0 : t.grad()[k];
    auto v = t.mutable_values();
    const double saved = v[k];
    // The L1 terms have kinks; when the 1e-5 stencil straddles one, a ten
    // times narrower stencil clears it.
    double err = 1e300;
    for (double step : {gradcheck::kStep, gradcheck::kStep / 10}) {
      v[k] = saved + step;
      const double up = loss().item();
      v[k] = saved - step;
      const double down = loss().item();
      v[k] = saved;
      err = std::min(err, gradcheck::relative_error(analytic, (up - down) / (2 * step)));
      if (err <= 1e-3) break;
    }
    if (err > worst) {
      worst = err;
      where = name + "[" + std::to_string(k) + "]";
    }
  }
  INFO(where);
  CHECK(worst <= 1e-3);
}

TEST_CASE("one optimizer step lowers the loss") {
  const SistConfig c = small_config();
  SistModel<float> model(c);
  const Sample s = small_sample(c);
  const auto s_ld = as_tensor<float>(s.s_ld), s_nd = as_tensor<float>(s.s_nd);
  const auto i_ld = as_tensor<float>(s.i_ld), i_nd = as_tensor<float>(s.i_nd);
  Adam<float> adam(model.params());
  const auto before = model.total_loss(model.forward(s_ld, i_ld), s_nd, i_nd, i_ld);
  model.params().zero_grad();
  before.backward();
  adam.step(1e-4);
  const float after = model.total_loss(model.forward(s_ld, i_ld), s_nd, i_nd, i_ld).item();
  CHECK(after < before.item());
}

TEST_CASE("seeded initialization") {
  SistConfig c = small_config();
  const SistModel<float> a(c), b(c);
  c.seed = 2;
  const SistModel<float> other(c);
  bool all_equal = true, any_diff = false;
  for (std::size_t p = 0; p < a.params().entries().size(); ++p) {
    const auto& x = a.params().entries()[p].second;
    all_equal &= std::equal(x.values().begin(), x.values().end(), b.params().entries()[p].second.values().begin());
    any_diff |= !std::equal(x.values().begin(), x.values().end(), other.params().entries()[p].second.values().begin());
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "sist_model_ckpt";
  std::filesystem::create_directories(dir);
  const SistConfig c = small_config();
  SistModel<float> model(c);
  Adam<float> adam(model.params());
  const Sample s = small_sample(c);
  const auto s_ld = as_tensor<float>(s.s_ld), i_ld = as_tensor<float>(s.i_ld);
  model.total_loss(model.forward(s_ld, i_ld), as_tensor<float>(s.s_nd), as_tensor<float>(s.i_nd), i_ld).backward();
  adam.step(1e-3);

  KeyValues meta;
  c.write(meta);
  write_checkpoint(dir / "a.ckpt", model.params(), &adam, meta);
  const Checkpoint ckpt = read_checkpoint(dir / "a.ckpt");
  CHECK(ckpt.names.size() == model.params().entries().size());
  CHECK(ckpt.has_adam);
  CHECK(ckpt.adam_step == 1);

  const SistConfig restored_cfg = SistConfig::read(ckpt.header);
  CHECK(restored_cfg == c);
  SistModel<float> copy(restored_cfg);
  Adam<float> copy_adam(copy.params());
  restore_checkpoint(ckpt, copy.params(), &copy_adam);
  for (std::size_t p = 0; p < model.params().entries().size(); ++p) {
    const auto& x = model.params().entries()[p].second;
    CHECK(std::equal(x.values().begin(), x.values().end(), copy.params().entries()[p].second.values().begin()));
  }
  CHECK(copy_adam.first_moment() == adam.first_moment());
  CHECK(copy_adam.second_moment() == adam.second_moment());
  CHECK(copy_adam.steps() == 1);

  write_checkpoint(dir / "b.ckpt", copy.params(), &copy_adam, meta);
  CHECK(slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt"));

  SistConfig wider = c;
  wider.embed_dim = 32;
  SistModel<float> mismatch(wider);
  CHECK_THROWS_AS(restore_checkpoint(ckpt, mismatch.params()), std::runtime_error);

  std::string bytes = slurp(dir / "a.ckpt");
  std::ofstream(dir / "bad.ckpt", std::ios::binary) << bytes << "x";
  CHECK_THROWS(read_checkpoint(dir / "bad.ckpt"));
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
