#include <doctest.h>

#include <filesystem>
#include <fstream>

#include <torch/torch.h>

#include "gradcheck.hpp"
#include "pupillo/error.hpp"
#include "pupillo/losses.hpp"
#include "pupillo/model.hpp"

using namespace pupillo;

namespace {

// Parameter count written out layer by layer.
std::int64_t expected_parameters(const ModelConfig& c) {
  auto ch = [&](int k) { return static_cast<std::int64_t>(c.base_channels) << k; };
  auto double_conv = [&](std::int64_t in, std::int64_t out) {
    const std::int64_t per_conv_extra = c.batch_norm ? 2 * out : out;  // BN affine or bias
    return in * out * 9 + per_conv_extra + out * out * 9 + per_conv_extra;
  };
  std::int64_t n = 0;
  for (int k = 0; k < c.encoder_depth; ++k) n += double_conv(k == 0 ? 3 : ch(k - 1), ch(k));
  n += double_conv(ch(c.encoder_depth - 1), ch(c.encoder_depth));
  for (int k = c.encoder_depth - 1; k >= 0; --k) {
    n += ch(k + 1) * ch(k) * 4 + ch(k);
    n += double_conv(2 * ch(k), ch(k));
  }
  n += ch(0) + 1;
  return n;
}

std::int64_t expected_head(const ModelConfig& c) {
  std::int64_t n = 0, width = 3 * (static_cast<std::int64_t>(c.base_channels) << c.encoder_depth);
  for (int h : c.head_hidden) {
    n += width * h + h;
    width = h;
  }
  return n + width * 5 + 5;
}

ModelConfig small(bool head = true) {
  ModelConfig c;
  c.input_size = 32;
  c.encoder_depth = 2;
  c.base_channels = 4;
  c.regression_head = head;
  c.head_hidden = {8};
  return c;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("default configuration shapes and ranges") {
  ModelConfig seg;
  seg.regression_head = false;
  UNet m = build_model(seg, 0);
  const auto out = infer(m, torch::zeros({1, 3, 224, 224}));
  CHECK(out.mask.sizes() == torch::IntArrayRef({1, 1, 224, 224}));
  CHECK(out.mask.gt(0).all().item<bool>());
  CHECK(out.mask.lt(1).all().item<bool>());
  CHECK_FALSE(out.params.defined());

  UNet joint = build_model(ModelConfig{}, 0);
  const auto o2 = infer(joint, torch::zeros({1, 3, 224, 224}));
  REQUIRE(o2.params.defined());
  CHECK(o2.params.sizes() == torch::IntArrayRef({1, 5}));
  CHECK(torch::isfinite(o2.params).all().item<bool>());
  CHECK(o2.params.narrow(1, 0, 4).gt(0).all().item<bool>());
  CHECK(o2.params.narrow(1, 0, 4).lt(1).all().item<bool>());
  CHECK(o2.params.narrow(1, 4, 1).abs().le(1).all().item<bool>());
}

TEST_CASE("configuration errors") {
  ModelConfig c;
  c.input_size = 100;
  try {
    build_model(c);
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
  UNet m = build_model(small());
  try {
    infer(m, torch::zeros({1, 3, 16, 16}));
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeMismatch);
  }
  CHECK_THROWS_AS(infer(m, torch::zeros({1, 32, 32, 3})), Error);
}

TEST_CASE("batch independence and determinism in inference") {
  UNet m = build_model(small(), 4);
  torch::manual_seed(9);
  const auto img = torch::rand({1, 3, 32, 32});
  const auto out = infer(m, torch::cat({img, img}));
  CHECK(torch::equal(out.mask[0], out.mask[1]));
  CHECK(torch::equal(out.params[0], out.params[1]));
  const auto again = infer(m, torch::cat({img, img}));
  CHECK(torch::equal(out.mask, again.mask));
  const auto noise = infer(m, torch::rand({4, 3, 32, 32}));
  CHECK(noise.mask.gt(0).all().item<bool>());
  CHECK(noise.mask.lt(1).all().item<bool>());
}

TEST_CASE("parameter counts") {
  ModelConfig seg;
  seg.regression_head = false;
  const auto p0 = count_parameters(*build_model(seg));
  const auto p1 = count_parameters(*build_model(ModelConfig{}));
  CHECK(p0 == expected_parameters(seg));
  CHECK(p1 > p0);
  CHECK(p1 - p0 == expected_head(ModelConfig{}));
  // Near the reported 7.8M and 8.1M.
  CHECK(p0 > 7.5e6);
  CHECK(p0 < 8.1e6);

  ModelConfig wide = seg;
  wide.base_channels = 64;
  const auto p2 = count_parameters(*build_model(wide));
  CHECK(p2 == expected_parameters(wide));
  const double ratio = static_cast<double>(p2) / static_cast<double>(p0);
  CHECK(ratio < 4.0);
  CHECK(ratio > 3.9);

  ModelConfig plain = small(false);
  plain.batch_norm = false;
  CHECK(count_parameters(*build_model(plain)) == expected_parameters(plain));
}

TEST_CASE("the mask-only model is a sub-network of the joint model") {
  UNet joint = build_model(small(true), 42);
  UNet seg = build_model(small(false), 42);
  const auto jp = joint->named_parameters();
  const auto sp = seg->named_parameters();
  CHECK(jp.size() > sp.size());
  for (const auto& p : sp) {
    REQUIRE(jp.contains(p.key()));
    CHECK(torch::equal(p.value(), jp[p.key()]));
  }
  torch::manual_seed(1);
  const auto img = torch::rand({2, 3, 32, 32});
  CHECK(torch::equal(infer(joint, img).mask, infer(seg, img).mask));
  joint->eval();
  torch::NoGradGuard g;
  CHECK(torch::equal(joint->forward_mask(img), infer(seg, img).mask));
}

TEST_CASE("checkpoint round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "pupillo_test_ckpt";
  std::filesystem::create_directories(dir);
  UNet m = build_model(small(), 3);
  save_checkpoint(m, dir / "m.pt");
  UNet back = load_checkpoint(dir / "m.pt");
  CHECK(back->config() == m->config());
  torch::manual_seed(2);
  const auto img = torch::rand({1, 3, 32, 32});
  const auto a = infer(m, img), b = infer(back, img);
  CHECK(torch::equal(a.mask, b.mask));
  CHECK(torch::equal(a.params, b.params));

  // The archive embeds the file stem, so compare same-named files.
  std::filesystem::create_directories(dir / "again");
  save_checkpoint(m, dir / "again" / "m.pt");
  std::ifstream f1(dir / "m.pt", std::ios::binary), f2(dir / "again" / "m.pt", std::ios::binary);
  const std::string s1((std::istreambuf_iterator<char>(f1)), {}), s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);

  // Weights that do not fit the embedded config are rejected.
  ModelConfig other = small();
  other.base_channels = 8;
  UNet wrong = build_model(small(), 0);
  torch::serialize::OutputArchive archive;
  archive.write("config", c10::IValue(nlohmann::json(other).dump()));
  wrong->save(archive);
  archive.save_to((dir / "bad.pt").string());
  try {
    load_checkpoint(dir / "bad.pt");
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.pt"), Error);
}

TEST_CASE("model config JSON") {
  ModelConfig c = small();
  c.batch_norm = false;
  CHECK(nlohmann::json(c).get<ModelConfig>() == c);
}

}  // TEST_SUITE

TEST_SUITE("model") {

TEST_CASE("backprop through the network matches finite differences") {
  const auto r = testing::model_gradient_check(20, 11, 1e-3);
  MESSAGE("worst relative error " << r.worst_relative);
  CHECK(r.within == r.checked);
}

}  // TEST_SUITE
