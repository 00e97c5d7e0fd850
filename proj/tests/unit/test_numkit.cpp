#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "fsb/error.hpp"
#include "fsb/numkit/adam.hpp"
#include "fsb/numkit/alloc_counter.hpp"
#include "fsb/numkit/fsb_io.hpp"
#include "fsb/numkit/grad_tape.hpp"
#include "fsb/numkit/kernels.hpp"
#include "fsb/numkit/parallel.hpp"
#include "support.hpp"

using namespace fsb;
using namespace fsb::numkit;
using fsb::testing::random_array;
using fsb::testing::rel_err;

namespace {

Array naive_matmul(const Array& a, const Array& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<float> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      float acc = 0.0f;
      for (std::size_t t = 0; t < k; ++t) acc += a.at(i, t) * b.at(t, j);
      out[i * n + j] = acc;
    }
  }
  return Array({m, n}, std::move(out));
}

AttnWeights random_attn(std::size_t d, std::size_t heads, std::uint64_t seed) {
  AttnWeights w;
  w.wq = random_array({d, d}, seed + 1, -0.5f, 0.5f);
  w.wk = random_array({d, d}, seed + 2, -0.5f, 0.5f);
  w.wv = random_array({d, d}, seed + 3, -0.5f, 0.5f);
  w.wo = random_array({d, d}, seed + 4, -0.5f, 0.5f);
  w.bq = random_array({d}, seed + 5, -0.1f, 0.1f);
  w.bk = random_array({d}, seed + 6, -0.1f, 0.1f);
  w.bv = random_array({d}, seed + 7, -0.1f, 0.1f);
  w.bo = random_array({d}, seed + 8, -0.1f, 0.1f);
  w.ln_gamma = random_array({d}, seed + 9, 0.5f, 1.5f);
  w.ln_beta = random_array({d}, seed + 10, -0.1f, 0.1f);
  w.heads = heads;
  return w;
}

// Straight transcription of softmax(QK^T/sqrt(d))V Wo + bo + x, then LN, in double.
std::vector<double> attention_oracle(const Array& x, const Array& ctx, const AttnWeights& w) {
  const std::size_t m = x.dim(0), n = ctx.dim(0), d = x.dim(1), hd = d / w.heads;
  auto proj = [&](const Array& in, const Array& W, const Array& b, std::size_t r, std::size_t c) {
    double acc = b[c];
    for (std::size_t t = 0; t < d; ++t) acc += static_cast<double>(in.at(r, t)) * W.at(t, c);
    return acc;
  };
  std::vector<double> heads(m * d, 0.0);
  for (std::size_t h = 0; h < w.heads; ++h) {
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> s(n);
      double mx = -1e300;
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0.0;
        for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) dot += proj(x, w.wq, w.bq, i, c) * proj(ctx, w.wk, w.bk, j, c);
        s[j] = dot / std::sqrt(static_cast<double>(hd));
        mx = std::max(mx, s[j]);
      }
      double z = 0.0;
      for (double& v : s) z += (v = std::exp(v - mx));
      for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += s[j] / z * proj(ctx, w.wv, w.bv, j, c);
        heads[i * d + c] = acc;
      }
    }
  }
  std::vector<double> out(m * d);
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> row(d);
    for (std::size_t c = 0; c < d; ++c) {
      double acc = w.bo[c];
      for (std::size_t t = 0; t < d; ++t) acc += heads[i * d + t] * w.wo.at(t, c);
      row[c] = acc + x.at(i, c);
    }
    double mean = 0.0, var = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) {
      out[i * d + c] = (row[c] - mean) / std::sqrt(var + 1e-5) * w.ln_gamma[c] + w.ln_beta[c];
    }
  }
  return out;
}

double bilinear_oracle(const Array& img, double x, double y, std::size_t c) {
  const double W = static_cast<double>(img.dim(1)), H = static_cast<double>(img.dim(0));
  x = std::min(std::max(x, 0.0), W - 1.0);
  y = std::min(std::max(y, 0.0), H - 1.0);
  const auto px = [&](long yy, long xx) {
    xx = std::min<long>(xx, static_cast<long>(W) - 1);
    yy = std::min<long>(yy, static_cast<long>(H) - 1);
    return static_cast<double>(img.data()[(static_cast<std::size_t>(yy) * img.dim(1) + static_cast<std::size_t>(xx)) * img.dim(2) + c]);
  };
  const long x0 = static_cast<long>(std::floor(x)), y0 = static_cast<long>(std::floor(y));
  const double ax = x - static_cast<double>(x0), ay = y - static_cast<double>(y0);
  return (1 - ax) * (1 - ay) * px(y0, x0) + ax * (1 - ay) * px(y0, x0 + 1) + (1 - ax) * ay * px(y0 + 1, x0) +
         ax * ay * px(y0 + 1, x0 + 1);
}

}  // namespace

TEST_CASE("matmul basics") {
  const Array m = random_array({3, 4}, 7);
  CHECK(matmul(Array::identity(3), m).bit_equal(m));
  const Array r = matmul(Array::from_rows({{1, 2}, {3, 4}}), Array::from_rows({{0}, {1}}));
  CHECK(r.bit_equal(Array::from_rows({{2}, {4}})));
  CHECK_THROWS_AS(matmul(Array::zeros({2, 3}), Array::zeros({2, 3})), ShapeError);
}

TEST_CASE("matmul matches naive triple loop bit for bit") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Array a = random_array({8, 8}, seed * 2);
    const Array b = random_array({8, 8}, seed * 2 + 1);
    CHECK(matmul(a, b).bit_equal(naive_matmul(a, b)));
  }
}

TEST_CASE("kernels are identical at any thread count") {
  const Array a = random_array({257, 96}, 1);
  const Array b = random_array({96, 130}, 2);
  set_num_threads(1);
  const Array one = matmul(a, b);
  set_num_threads(4);
  const Array four = matmul(a, b);
  set_num_threads(3);
  const Array three = matmul(a, b);
  set_num_threads(1);
  CHECK(one.bit_equal(four));
  CHECK(one.bit_equal(three));
  CHECK(one.bit_equal(naive_matmul(a, b)));
}

TEST_CASE("bilinear sample") {
  SUBCASE("lattice-aligned grid is an exact gather") {
    const Array img = random_array({5, 6, 3}, 3);
    Array grid({2, 3, 2});
    const float pts[6][2] = {{0, 0}, {5, 4}, {2, 1}, {3, 3}, {1, 4}, {4, 0}};
    for (int i = 0; i < 6; ++i) {
      grid.mutable_data()[2 * i] = pts[i][0];
      grid.mutable_data()[2 * i + 1] = pts[i][1];
    }
    const Array out = bilinear_sample(img, grid);
    for (int i = 0; i < 6; ++i) {
      for (std::size_t c = 0; c < 3; ++c) {
        const auto x = static_cast<std::size_t>(pts[i][0]), y = static_cast<std::size_t>(pts[i][1]);
        CHECK(out.data()[i * 3 + c] == img.data()[(y * 6 + x) * 3 + c]);
      }
    }
  }
  SUBCASE("midpoint of a 0/1 edge") {
    const Array img({2, 2, 1}, {0, 0, 1, 1});
    const Array out = bilinear_sample(img, Array({1, 1, 2}, {0.5f, 0.5f}));
    CHECK(out[0] == 0.5f);
  }
  SUBCASE("random grids match the scalar oracle") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const Array img = random_array({7, 9, 2}, 100 + seed);
      const Array grid = random_array({4, 5, 2}, 200 + seed, -2.0f, 11.0f);
      const Array out = bilinear_sample(img, grid);
      for (std::size_t p = 0; p < 20; ++p) {
        for (std::size_t c = 0; c < 2; ++c) {
          const double want = bilinear_oracle(img, grid[2 * p], grid[2 * p + 1], c);
          CHECK(std::fabs(out[p * 2 + c] - want) <= 1e-6);
        }
      }
    }
  }
  SUBCASE("empty grid rejected") {
    const Array img = random_array({2, 2, 1}, 1);
    std::vector<float> out;
    CHECK_THROWS_AS(bilinear_sample(as_matrix(img), 2, 2, std::span<const float>{}, out), ShapeError);
  }
}

TEST_CASE("attention block") {
  SUBCASE("single token with identity value path returns its value") {
    const std::size_t d = 4;
    AttnWeights w = random_attn(d, 2, 5);
    w.wv = Array::identity(d);
    w.bv = Array::zeros({d});
    w.wo = Array::identity(d);
    w.bo = Array::zeros({d});
    w.residual = false;
    w.layer_norm = false;
    const Array x = random_array({1, d}, 9);
    CHECK(attention_block(x, w).bit_equal(x));
  }
  SUBCASE("identical tokens give identical rows") {
    const AttnWeights w = random_attn(8, 2, 6);
    const Array row = random_array({1, 8}, 10);
    Array x({2, 8});
    for (std::size_t j = 0; j < 8; ++j) x.at_mut(0, j) = x.at_mut(1, j) = row[j];
    const Array out = attention_block(x, w);
    CHECK(std::memcmp(out.data().data(), out.data().data() + 8, 8 * sizeof(float)) == 0);
  }
  SUBCASE("random cases match the direct oracle") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const AttnWeights w = random_attn(8, 2, seed * 13);
      const Array x = random_array({4, 8}, seed * 13 + 11);
      const Array ctx = random_array({6, 8}, seed * 13 + 12);
      const auto self = attention_oracle(x, x, w);
      const Array got_self = attention_block(x, w);
      for (std::size_t i = 0; i < self.size(); ++i) CHECK(std::fabs(got_self[i] - self[i]) <= 1e-5);
      const auto cross = attention_oracle(x, ctx, w);
      const Array got_cross = attention_block(x, ctx, w);
      for (std::size_t i = 0; i < cross.size(); ++i) CHECK(std::fabs(got_cross[i] - cross[i]) <= 1e-5);
    }
  }
  SUBCASE("non-finite logits raise") {
    AttnWeights w = random_attn(4, 1, 3);
    Array x = random_array({2, 4}, 4);
    x.mutable_data()[0] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(attention_block(x, w), NumericError);
  }
  SUBCASE("head count must divide width") {
    AttnWeights w = random_attn(6, 4, 3);
    CHECK_THROWS_AS(attention_block(random_array({2, 6}, 1), w), ShapeError);
  }
}

TEST_CASE("grad tape basics") {
  GradTape tape;
  const Array xv = random_array({3, 2}, 4);
  const Var x = tape.input(xv);
  const Var unused = tape.input(random_array({2}, 5));
  SUBCASE("sum gives ones") {
    const auto g = tape.grad(tape.sum(x));
    for (float v : g.at(x).data()) CHECK(v == 1.0f);
    for (float v : g.at(unused).data()) CHECK(v == 0.0f);
  }
  SUBCASE("squared norm gives 2x") {
    const auto g = tape.grad(tape.sum_squares(x));
    for (std::size_t i = 0; i < xv.size(); ++i) CHECK(g.at(x)[i] == 2.0f * xv[i]);
  }
  SUBCASE("foreign handles are rejected") {
    GradTape other;
    const Var y = other.input(xv);
    CHECK_THROWS_AS(tape.sum(y), UsageError);
    CHECK_THROWS_AS(tape.grad(other.sum(y)), UsageError);
  }
  SUBCASE("loss must be scalar") { CHECK_THROWS_AS(tape.grad(x), UsageError); }
}

// loss = sum |relu(X W + b) * M - T| + 0.5 * sum((X W)^2) + sum(reshape(X)) * 0.3 - sum(X)
// evaluated independently in double for the finite-difference reference.
TEST_CASE("grad tape matches finite differences on every primitive") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Array X = random_array({3, 4}, seed * 7 + 1);
    const Array W = random_array({4, 5}, seed * 7 + 2);
    const Array b = random_array({5}, seed * 7 + 3, -0.2f, 0.2f);
    const Array M = random_array({3, 5}, seed * 7 + 4);
    const Array T = random_array({3, 5}, seed * 7 + 5, -3.0f, 3.0f);

    GradTape tape;
    const Var x = tape.input(X), w = tape.input(W), bb = tape.input(b), m = tape.input(M);
    const Var t = tape.constant(T);
    const Var xw = tape.matmul(x, w);
    const Var h = tape.relu(tape.add_row_bias(xw, bb));
    const Var l1 = tape.abs_sum(tape.sub(tape.mul(h, m), t));
    const Var l2 = tape.scale(tape.sum_squares(xw), 0.5f);
    const Var l3 = tape.scale(tape.sum(tape.reshape(x, {12})), 0.3f);
    const Var loss = tape.sub(tape.add(l1, l2), tape.sum(tape.add(x, tape.scale(x, 0.0f))));
    const Var total = tape.add(loss, l3);
    const auto g = tape.grad(total);

    auto f = [&](const std::vector<double>& p) {
      // p = X(12) W(20) b(5) M(15)
      double l1v = 0, l2v = 0, l3v = 0, sx = 0;
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 5; ++j) {
          double acc = 0;
          for (std::size_t k = 0; k < 4; ++k) acc += p[i * 4 + k] * p[12 + k * 5 + j];
          l2v += acc * acc;
          const double hv = std::max(0.0, acc + p[32 + j]);
          l1v += std::fabs(hv * p[37 + i * 5 + j] - T.at(i, j));
        }
      }
      for (std::size_t i = 0; i < 12; ++i) {
        l3v += p[i];
        sx += p[i];
      }
      return l1v + 0.5 * l2v - sx + 0.3 * l3v;
    };
    std::vector<double> p;
    for (const Array* a : {&X, &W, &b, &M}) p.insert(p.end(), a->data().begin(), a->data().end());
    const auto fd = fsb::testing::central_diff_checked(p, f);
    std::vector<float> got;
    for (Var v : {x, w, bb, m}) got.insert(got.end(), g.at(v).data().begin(), g.at(v).data().end());
    REQUIRE(got.size() == fd.grad.size());
    double worst = 0;
    std::size_t kinks = 0;
    for (std::size_t i = 0; i < fd.grad.size(); ++i) {
      if (!fd.smooth[i]) {
        ++kinks;
        continue;
      }
      worst = std::max(worst, rel_err(got[i], fd.grad[i]));
    }
    CHECK(worst <= 1e-2);
    CHECK(kinks <= fd.grad.size() / 10);
  }
}

TEST_CASE("custom op backward is invoked with per-input gradients") {
  GradTape tape;
  const Array av = random_array({3}, 1);
  const Var a = tape.input(av);
  Array cube({3});
  for (std::size_t i = 0; i < 3; ++i) cube.mutable_data()[i] = av[i] * av[i] * av[i];
  const Var inputs[] = {a};
  const Var c = tape.custom(inputs, cube, [av](const Array& go, std::span<Array> grads) {
    for (std::size_t i = 0; i < 3; ++i) grads[0].mutable_data()[i] += 3.0f * av[i] * av[i] * go[i];
  });
  const auto g = tape.grad(tape.sum(c));
  for (std::size_t i = 0; i < 3; ++i) CHECK(g.at(a)[i] == doctest::Approx(3.0f * av[i] * av[i]));
}

TEST_CASE("adam minimizes a quadratic") {
  std::vector<float> x = {3.0f, -2.0f};
  Adam opt(2, {.lr = 0.1f});
  for (int i = 0; i < 500; ++i) {
    const std::vector<float> g = {2.0f * (x[0] - 1.0f), 2.0f * (x[1] + 0.5f)};
    opt.step(x, g);
  }
  CHECK(x[0] == doctest::Approx(1.0f).epsilon(1e-3));
  CHECK(x[1] == doctest::Approx(-0.5f).epsilon(1e-3));
}

TEST_CASE("FSB1 round trip") {
  const Array a = random_array({2, 3, 4}, 11);
  const auto bytes = encode_fsb1(a);
  REQUIRE(bytes.size() == 8 + 12 + 96);
  CHECK(std::memcmp(bytes.data(), "FSB1", 4) == 0);
  CHECK(bytes[4] == 3);
  CHECK(decode_fsb1(bytes).bit_equal(a));
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_fsb1(bad), IoError);
  bad = bytes;
  bad.pop_back();
  CHECK_THROWS_AS(decode_fsb1(bad), IoError);

  const auto dir = std::filesystem::temp_directory_path() / "fsb_numkit_bundle";
  std::filesystem::remove_all(dir);
  ArrayBundle bundle;
  bundle.put("w", a);
  bundle.put("b", random_array({5}, 12));
  bundle.meta_json = R"({"kind":"test"})";
  save_bundle(dir, bundle);
  const ArrayBundle back = load_bundle(dir);
  CHECK(back.get("w").bit_equal(a));
  CHECK(back.get("b").bit_equal(bundle.get("b")));
  CHECK(back.meta_json == R"({"kind":"test"})");
  CHECK_THROWS_AS(back.get("missing"), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("arena workspace stops allocating after warmup") {
  Workspace ws(Workspace::Mode::arena);
  auto frame = [&] {
    for (std::size_t n : {100000u, 5000u, 70000u, 3u}) ws.take(n);
    ws.reset();
  };
  frame();
  frame();
  alloc::Probe probe;
  for (int i = 0; i < 10; ++i) frame();
  CHECK(probe.allocations() == 0);

  Workspace dyn(Workspace::Mode::dynamic);
  alloc::Probe dprobe;
  dyn.take(10);
  dyn.take(10);
  dyn.reset();
  CHECK(dprobe.allocations() >= 2);
}

TEST_CASE("array shape checks") {
  CHECK_THROWS_AS(Array({2, 0}), ShapeError);
  CHECK_THROWS_AS(Array({2, 2}, std::vector<float>(3)), ShapeError);
}
