// Serialization contracts: checkpoints and chain dumps survive round-trips
// bit for bit, the on-disk layouts match an independent byte walk, corrupted
// inputs are rejected before any state changes, and the IDX reader agrees
// with hand-built files.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "febm/io.hpp"
#include "febm/rng.hpp"
#include "test_util.hpp"

using febm::ChainEnsemble;
using febm::Checkpoint;
using febm::Rng;
using febm::Tensor;

namespace {

std::filesystem::path temp_file(const std::string& tag) {
  return std::filesystem::temp_directory_path() /
         ("febm_io_test_" + tag + ".bin");
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                   std::istreambuf_iterator<char>());
}

void spit(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
}

// Little-endian readers for the independent byte walk.
std::uint32_t rd_u32(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(b.at(pos++)) << (8 * i);
  return v;
}
std::uint16_t rd_u16(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  std::uint16_t lo = b.at(pos++), hi = b.at(pos++);
  return static_cast<std::uint16_t>(lo | (hi << 8));
}
double rd_f64(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b.at(pos++)) << (8 * i);
  return std::bit_cast<double>(v);
}

bool bits_equal(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

Tensor random_tensor(Rng& rng) {
  const std::size_t rank = 1 + rng.uniform_index(3);
  std::vector<std::size_t> shape;
  for (std::size_t a = 0; a < rank; ++a) shape.push_back(1 + rng.uniform_index(5));
  Tensor t = Tensor::zeros(shape);
  for (std::size_t i = 0; i < t.size(); ++i) {
    switch (rng.uniform_index(8)) {
      case 0: t.data()[i] = 0.0; break;
      case 1: t.data()[i] = -0.0; break;
      case 2: t.data()[i] = 1e-310; break;  // subnormal
      case 3: t.data()[i] = std::numeric_limits<double>::max(); break;
      default: t.data()[i] = 1e3 * (2.0 * rng.uniform() - 1.0);
    }
  }
  return t;
}

std::string random_name(Rng& rng, std::size_t index) {
  static const char* stems[] = {"flow.l", "energy.l", "meta.x", "opt.m",
                                "nce.b"};
  std::string name = stems[rng.uniform_index(5)];
  name += std::to_string(index);  // uniqueness within a checkpoint
  if (rng.uniform() < 0.5) name += ".w";
  return name;
}

ChainEnsemble random_ensemble(Rng& rng) {
  const std::size_t chains = 1 + rng.uniform_index(4);
  const std::size_t steps = 2 + rng.uniform_index(6);
  const std::size_t dim = 1 + rng.uniform_index(3);
  ChainEnsemble e = ChainEnsemble::empty(chains, steps, dim);
  e.burn_in = rng.uniform_index(steps);
  e.stride = 1 + rng.uniform_index(4);
  for (std::size_t i = 0; i < e.z.size(); ++i)
    e.z[i] = 1e2 * (2.0 * rng.uniform() - 1.0);
  for (std::size_t i = 0; i < e.energy.size(); ++i) {
    e.energy[i] = -50.0 * rng.uniform();
    e.accepted[i] = rng.uniform() < 0.7 ? 1 : 0;
    e.step_size[i] = rng.uniform();
  }
  return e;
}

}  // namespace

TEST_CASE("checkpoints round-trip arbitrary records bit for bit") {
  Rng rng(101);
  const auto path = temp_file("roundtrip");
  for (int trial = 0; trial < 100; ++trial) {
    Checkpoint ckpt;
    const std::size_t count = 1 + rng.uniform_index(8);
    for (std::size_t r = 0; r < count; ++r)
      ckpt.add(random_name(rng, r), random_tensor(rng));
    febm::save_checkpoint(path.string(), ckpt);
    const Checkpoint back = febm::load_checkpoint(path.string());
    REQUIRE(back.version == ckpt.version);
    REQUIRE(back.records.size() == ckpt.records.size());
    for (std::size_t r = 0; r < count; ++r) {
      CHECK(back.records[r].first == ckpt.records[r].first);
      const Tensor& a = ckpt.records[r].second;
      const Tensor& b = back.records[r].second;
      REQUIRE(a.same_shape(b));
      for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(bits_equal(a.data()[i], b.data()[i]));
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint bytes match an independent walk of the layout") {
  Checkpoint ckpt;
  ckpt.add("ab", Tensor({2, 3}, {1.0, -2.5, 0.0, 4.0, 5.5, -0.0}));
  ckpt.add("meta.q", Tensor({1}, {7.0}));
  const auto path = temp_file("layout");
  febm::save_checkpoint(path.string(), ckpt);
  const auto bytes = slurp(path);

  std::size_t pos = 0;
  CHECK(bytes.at(0) == 'F');
  CHECK(bytes.at(1) == 'E');
  CHECK(bytes.at(2) == 'B');
  CHECK(bytes.at(3) == 'M');
  pos = 4;
  CHECK(rd_u32(bytes, pos) == 1);  // version
  CHECK(rd_u32(bytes, pos) == 2);  // record count

  CHECK(rd_u16(bytes, pos) == 2);  // name length
  CHECK(bytes.at(pos) == 'a');
  CHECK(bytes.at(pos + 1) == 'b');
  pos += 2;
  CHECK(bytes.at(pos++) == 0);  // dtype f64
  CHECK(bytes.at(pos++) == 2);  // rank
  CHECK(rd_u32(bytes, pos) == 2);
  CHECK(rd_u32(bytes, pos) == 3);
  const double expect[6] = {1.0, -2.5, 0.0, 4.0, 5.5, -0.0};
  for (double e : expect) CHECK(bits_equal(rd_f64(bytes, pos), e));

  CHECK(rd_u16(bytes, pos) == 6);
  pos += 6;                     // "meta.q"
  CHECK(bytes.at(pos++) == 0);  // dtype
  CHECK(bytes.at(pos++) == 1);  // rank
  CHECK(rd_u32(bytes, pos) == 1);
  CHECK(bits_equal(rd_f64(bytes, pos), 7.0));
  CHECK(pos == bytes.size());  // nothing after the last payload
  std::filesystem::remove(path);
}

TEST_CASE("corrupted checkpoints are rejected") {
  Checkpoint ckpt;
  ckpt.add("w", Tensor({2, 2}, {1.0, 2.0, 3.0, 4.0}));
  const auto path = temp_file("corrupt");
  febm::save_checkpoint(path.string(), ckpt);
  const auto good = slurp(path);

  auto expect_reject = [&](std::vector<std::uint8_t> bytes) {
    spit(path, bytes);
    CHECK_THROWS_AS(febm::load_checkpoint(path.string()), febm::IoError);
  };

  {
    auto b = good;
    b[0] = 'X';
    expect_reject(b);  // bad magic
  }
  {
    auto b = good;
    b[4] = 9;
    expect_reject(b);  // unsupported version
  }
  {
    auto b = good;
    b.pop_back();
    expect_reject(b);  // truncated payload
  }
  {
    auto b = good;
    b.push_back(0);
    expect_reject(b);  // trailing bytes
  }
  {
    auto b = good;
    b[12 + 1 + 2] = 7;  // dtype byte of the first record
    expect_reject(b);
  }
  {
    auto b = good;
    b[12 + 1 + 3] = 0;  // rank 0
    expect_reject(b);
  }
  {
    // Extents multiplying far beyond the payload must fail cleanly instead
    // of wrapping around.
    auto b = good;
    for (int i = 0; i < 4; ++i) {
      b[12 + 1 + 4 + i] = 0xff;
      b[12 + 1 + 8 + i] = 0xff;
    }
    expect_reject(b);
  }
  {
    // Same record twice: duplicate names are rejected.
    Checkpoint dup;
    dup.add("w", Tensor({1}, {1.0}));
    febm::save_checkpoint(path.string(), dup);
    auto b = slurp(path);
    std::vector<std::uint8_t> twice(b.begin(), b.begin() + 12);
    twice[8] = 2;  // record count
    twice.insert(twice.end(), b.begin() + 12, b.end());
    twice.insert(twice.end(), b.begin() + 12, b.end());
    expect_reject(twice);
  }
  CHECK_THROWS_AS(febm::load_checkpoint("/nonexistent/febm.ckpt"),
                  febm::IoError);
  std::filesystem::remove(path);
}

TEST_CASE("parameter restoration verifies everything before copying") {
  Tensor w({2}, {1.0, 2.0});
  Tensor b({1}, {3.0});
  const std::vector<febm::NamedParam> params{{"w", &w}, {"b", &b}};
  Checkpoint ckpt = febm::make_checkpoint(params);

  // A full checkpoint restores into fresh tensors.
  Tensor w2({2}, {0.0, 0.0});
  Tensor b2({1}, {0.0});
  febm::apply_params(ckpt, {{"w", &w2}, {"b", &b2}});
  CHECK(w2[0] == 1.0);
  CHECK(b2[0] == 3.0);

  // A missing record leaves every target untouched.
  Tensor w3({2}, {-7.0, -7.0});
  Tensor b3({1}, {-7.0});
  Checkpoint partial;
  partial.add("w", Tensor({2}, {9.0, 9.0}));
  CHECK_THROWS_AS(febm::apply_params(partial, {{"w", &w3}, {"b", &b3}}),
                  febm::IoError);
  CHECK(w3[0] == -7.0);
  CHECK(b3[0] == -7.0);

  // So does a shape mismatch.
  Checkpoint wrong;
  wrong.add("w", Tensor({3}, {1.0, 2.0, 3.0}));
  wrong.add("b", Tensor({1}, {4.0}));
  CHECK_THROWS_AS(febm::apply_params(wrong, {{"w", &w3}, {"b", &b3}}),
                  febm::IoError);
  CHECK(w3[1] == -7.0);
}

TEST_CASE("flow and tilted-model checkpoints restore identical models") {
  Rng rng(103);
  febm::FlowConfig fc;
  fc.dim = 3;
  fc.depth = 4;
  fc.hidden_width = 16;
  febm::FlowModel flow(fc);
  for (auto& p : flow.params())
    for (std::size_t i = 0; i < p.value->size(); ++i)
      (*p.value)[i] = 0.3 * (2.0 * rng.uniform() - 1.0);
  flow.mark_actnorm_ready();

  const auto path = temp_file("flow");
  febm::save_checkpoint(path.string(), febm::checkpoint_flow(flow));
  const Checkpoint ckpt = febm::load_checkpoint(path.string());
  CHECK_FALSE(febm::has_energy(ckpt));
  febm::FlowModel back = febm::restore_flow(ckpt);
  CHECK(back.dim() == 3);
  const Tensor z = febm::std_normal_batch(5, 3, rng);
  const Tensor xa = flow.forward(z);
  const Tensor xb = back.forward(z);
  for (std::size_t i = 0; i < xa.size(); ++i)
    CHECK(bits_equal(xa.data()[i], xb.data()[i]));

  febm::EnergyConfig ec;
  ec.dim = 3;
  ec.hidden_layers = 2;
  ec.hidden_width = 8;
  febm::EnergyModel energy(ec);
  for (auto& p : energy.params())
    for (std::size_t i = 0; i < p.value->size(); ++i)
      (*p.value)[i] = 0.5 * (2.0 * rng.uniform() - 1.0);

  febm::save_checkpoint(path.string(), febm::checkpoint_tilted(flow, energy));
  const Checkpoint tilted = febm::load_checkpoint(path.string());
  CHECK(febm::has_energy(tilted));
  febm::FlowModel rflow;
  febm::EnergyModel renergy;
  febm::restore_tilted(tilted, rflow, renergy);
  const Tensor fa = energy.value(xa);
  const Tensor fb = renergy.value(xa);
  for (std::size_t i = 0; i < fa.size(); ++i)
    CHECK(bits_equal(fa.data()[i], fb.data()[i]));
  const Tensor za = flow.inverse(xa).first;
  const Tensor zb = rflow.inverse(xa).first;
  for (std::size_t i = 0; i < za.size(); ++i)
    CHECK(bits_equal(za.data()[i], zb.data()[i]));
  std::filesystem::remove(path);
}

TEST_CASE("chain dumps round-trip bit for bit across 100 random cases") {
  Rng rng(107);
  const auto path = temp_file("chains");
  for (int trial = 0; trial < 100; ++trial) {
    const ChainEnsemble e = random_ensemble(rng);
    febm::dump_chains(path.string(), e);
    const ChainEnsemble back = febm::load_chains(path.string());
    REQUIRE(back.chains == e.chains);
    REQUIRE(back.steps == e.steps);
    REQUIRE(back.dim == e.dim);
    CHECK(back.burn_in == e.burn_in);
    CHECK(back.stride == e.stride);
    for (std::size_t i = 0; i < e.z.size(); ++i)
      CHECK(bits_equal(back.z[i], e.z[i]));
    for (std::size_t i = 0; i < e.energy.size(); ++i) {
      CHECK(bits_equal(back.energy[i], e.energy[i]));
      CHECK(back.accepted[i] == e.accepted[i]);
      CHECK(bits_equal(back.step_size[i], e.step_size[i]));
    }
  }
  std::filesystem::remove(path);
}

TEST_CASE("chain dump layout carries the pinned header and raw-step column") {
  ChainEnsemble e = ChainEnsemble::empty(2, 2, 2);
  e.burn_in = 1;
  e.stride = 5;
  for (std::size_t i = 0; i < e.z.size(); ++i)
    e.z[i] = static_cast<double>(i) + 0.25;
  for (std::size_t i = 0; i < 4; ++i) {
    e.energy[i] = -1.5;
    e.accepted[i] = 1;
    e.step_size[i] = 0.125;
  }
  const auto path = temp_file("chainfmt");
  febm::dump_chains(path.string(), e);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# febm-chains v1 burn_in=1 stride=5 dim=2");
  std::getline(in, line);
  CHECK(line == "chain,step,accepted,step_size,energy,z0,z1");
  std::getline(in, line);
  CHECK(line == "0,5,1,0.125,-1.5,0.25,1.25");
  std::getline(in, line);
  CHECK(line == "0,10,1,0.125,-1.5,2.25,3.25");
  std::getline(in, line);
  CHECK(line == "1,5,1,0.125,-1.5,4.25,5.25");
  std::getline(in, line);
  CHECK(line == "1,10,1,0.125,-1.5,6.25,7.25");
  CHECK_FALSE(std::getline(in, line));
  in.close();

  // Rows out of canonical chain-major order are rejected.
  std::ofstream out(path, std::ios::trunc);
  out << "# febm-chains v1 burn_in=0 stride=1 dim=1\n";
  out << "chain,step,accepted,step_size,energy,z0\n";
  out << "1,1,1,0.1,0,0.5\n";  // chain 1 before chain 0
  out << "0,1,1,0.1,0,0.5\n";
  out.close();
  CHECK_THROWS_AS(febm::load_chains(path.string()), febm::IoError);

  std::ofstream out2(path, std::ios::trunc);
  out2 << "# febm-chains v1 burn_in=0 stride=1 dim=1\n";
  out2 << "chain,step,accepted,step_size,energy,z0\n";
  out2 << "0,1,2,0.1,0,0.5\n";  // accepted flag outside {0, 1}
  out2.close();
  CHECK_THROWS_AS(febm::load_chains(path.string()), febm::IoError);
  std::filesystem::remove(path);
}

TEST_CASE("plain csv writer emits header plus formatted rows") {
  const auto path = temp_file("csv");
  febm::write_csv(path.string(), {"iteration", "loss"},
                  Tensor({2, 2}, {0.0, 1.5, 1.0, 0.75}));
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "iteration,loss");
  std::getline(in, line);
  CHECK(line == "0,1.5");
  std::getline(in, line);
  CHECK(line == "1,0.75");
  CHECK_THROWS_AS(
      febm::write_csv(path.string(), {"a"}, Tensor::zeros({2, 2})),
      febm::ShapeError);
  std::filesystem::remove(path);
}

TEST_CASE("idx readers agree with hand-built files") {
  const auto path = temp_file("idx");
  // Images: magic 0x00000803, two 2x3 images, pixels 0..11.
  std::vector<std::uint8_t> img{0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 2,
                                0, 0, 0, 3};
  for (std::uint8_t v = 0; v < 12; ++v) img.push_back(v);
  img[16] = 0;
  img[17] = 255;  // pin the extremes of the pixel map
  spit(path, img);
  std::size_t rows = 0, cols = 0;
  const Tensor images = febm::load_idx_images(path.string(), &rows, &cols);
  CHECK(rows == 2);
  CHECK(cols == 3);
  REQUIRE(images.rows() == 2);
  REQUIRE(images.cols() == 6);
  CHECK(images.at(0, 0) == -1.0);  // pixel 0
  CHECK(images.at(0, 1) == 1.0);   // pixel 255
  for (std::size_t i = 2; i < 12; ++i) {
    const double expect = static_cast<double>(img[4 * 3 + 4 + i]) / 255.0 * 2.0 - 1.0;
    CHECK(images.at(i / 6, i % 6) == doctest::Approx(expect).epsilon(1e-15));
  }

  // Labels: magic 0x00000801, three bytes.
  spit(path, {0, 0, 8, 1, 0, 0, 0, 3, 7, 0, 255});
  const std::vector<std::uint8_t> labels = febm::load_idx_labels(path.string());
  REQUIRE(labels.size() == 3);
  CHECK(labels[0] == 7);
  CHECK(labels[1] == 0);
  CHECK(labels[2] == 255);

  // Swapped magics and short payloads are rejected.
  CHECK_THROWS_AS(febm::load_idx_images(path.string(), nullptr, nullptr),
                  febm::IoError);
  spit(path, img);
  CHECK_THROWS_AS(febm::load_idx_labels(path.string()), febm::IoError);
  auto short_img = img;
  short_img.pop_back();
  spit(path, short_img);
  CHECK_THROWS_AS(febm::load_idx_images(path.string(), nullptr, nullptr),
                  febm::IoError);
  auto long_img = img;
  long_img.push_back(0);
  spit(path, long_img);
  CHECK_THROWS_AS(febm::load_idx_images(path.string(), nullptr, nullptr),
                  febm::IoError);
  std::filesystem::remove(path);
}

TEST_CASE("block downscale averages non-overlapping pixel blocks") {
  // One 4x4 image holding 0..15; factor 2 averages each 2x2 quadrant.
  Tensor img = Tensor::zeros({1, 16});
  for (std::size_t i = 0; i < 16; ++i) img.at(0, i) = static_cast<double>(i);
  const Tensor small = febm::block_downscale(img, 4, 4, 2);
  REQUIRE(small.rows() == 1);
  REQUIRE(small.cols() == 4);
  CHECK(small.at(0, 0) == doctest::Approx((0.0 + 1 + 4 + 5) / 4));
  CHECK(small.at(0, 1) == doctest::Approx((2.0 + 3 + 6 + 7) / 4));
  CHECK(small.at(0, 2) == doctest::Approx((8.0 + 9 + 12 + 13) / 4));
  CHECK(small.at(0, 3) == doctest::Approx((10.0 + 11 + 14 + 15) / 4));

  CHECK_THROWS_AS(febm::block_downscale(img, 4, 4, 3), febm::ShapeError);
}
