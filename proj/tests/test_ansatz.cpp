#include <doctest.h>

#include <algorithm>
#include <numbers>

#include "qrnn/ansatz.hpp"
#include "support.hpp"

using namespace qrnn;
using test::urand;

namespace {

constexpr double kPi = std::numbers::pi;

double max_abs(const CMatrix& m) { return m.cwiseAbs().maxCoeff(); }

double unitarity_dev(const CMatrix& u) {
  return max_abs(u * u.adjoint() - CMatrix::Identity(u.rows(), u.cols()));
}

}  // namespace

TEST_SUITE("gates-ansatz") {

TEST_CASE("rotation gates") {
  CHECK(max_abs(rotation_gate(Axis::Y, 0.0) - CMatrix::Identity(2, 2)) == 0.0);

  CMatrix ry_pi(2, 2);
  ry_pi << 0.0, -1.0, 1.0, 0.0;
  CHECK(max_abs(rotation_gate(Axis::Y, kPi) - ry_pi) <= 1e-15);

  for (const double theta : {0.3, 1.1, 2.5}) {
    // <Z> of Ry(theta)|0> via direct 2x2 algebra
    const CMatrix ry = rotation_gate(Axis::Y, theta);
    const CVector psi = ry.col(0);
    const double z = std::norm(psi(0)) - std::norm(psi(1));
    CHECK(z == doctest::Approx(std::cos(theta)).epsilon(1e-14));
  }

  std::mt19937_64 rng(21);
  for (const Axis axis : {Axis::X, Axis::Y, Axis::Z}) {
    CHECK(unitarity_dev(rotation_gate(axis, urand(rng, -4.0, 4.0))) <= 1e-14);
  }
}

TEST_CASE("u3 gate composition") {
  CHECK(max_abs(u3_gate(0.0, 0.0, 0.0) - CMatrix::Identity(2, 2)) == 0.0);
  CHECK(max_abs(u3_gate(0.8, 0.0, 0.0) - rotation_gate(Axis::Y, 0.8)) == 0.0);
  CHECK(unitarity_dev(u3_gate(0.4, 0.9, -1.2)) <= 1e-14);

  const CMatrix oracle = rotation_gate(Axis::Z, 0.9) * rotation_gate(Axis::Y, 0.4) *
                         rotation_gate(Axis::Z, -1.2);
  CHECK(max_abs(u3_gate(0.4, 0.9, -1.2) - oracle) <= 1e-15);
}

TEST_CASE("parameter counts of the reference shapes") {
  CHECK(test::case_a().param_count() == 31);
  CHECK(test::case_b().param_count() == 43);
  CHECK(test::case_c().param_count() == 100);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS((AnsatzConfig{0, 1, 1, 0, 1}.validate()), ConfigError);
  CHECK_THROWS_AS((AnsatzConfig{1, 1, 1, 0, 2}.validate()), ConfigError);  // n_inputs > n_e
  CHECK_THROWS_AS((AnsatzConfig{2, 1, -1, 0, 1}.validate()), ConfigError);
  CHECK_NOTHROW(test::case_c().validate());
}

TEST_CASE("layout is a bijection onto gate slots plus the bias") {
  for (const AnsatzConfig cfg : {test::case_a(), test::case_b(), test::case_c()}) {
    const ParameterLayout layout(cfg);
    CHECK(layout.count() == cfg.param_count());
    for (int i = 0; i < layout.count(); ++i) {
      const ParamSlot s = layout.slot(i);
      CHECK(layout.flat_index(s) == i);
      CHECK(layout.shiftable(i) == (s.role != ParamRole::kBias));
    }
    CHECK(layout.slot(layout.bias_index()).role == ParamRole::kBias);
    CHECK(layout.alpha_size() + layout.w_size() + 1 == layout.count());
    CHECK_THROWS_AS(layout.slot(layout.count()), ShapeError);
  }
}

TEST_CASE("encoding with zero angles is the identity") {
  const AnsatzConfig cfg{2, 1, 1, 2, 1};
  const RVector x = RVector::Zero(1);
  const std::vector<double> alpha(3 * cfg.n_e * cfg.reuploads, 0.0);
  CHECK(max_abs(build_encoding(x, alpha, cfg) - CMatrix::Identity(4, 4)) <= 1e-15);
}

TEST_CASE("degenerate encoding without re-uploads is a single rotation") {
  const AnsatzConfig cfg{1, 1, 1, 0, 1};
  RVector x(1);
  x << 0.42;
  const CMatrix v = build_encoding(x, {}, cfg);
  CHECK(max_abs(v - rotation_gate(Axis::Y, 0.42)) == 0.0);
}

TEST_CASE("encoding matches the hand-composed single-qubit product") {
  std::mt19937_64 rng(22);
  const AnsatzConfig cfg{1, 1, 1, 1, 1};
  RVector x(1);
  x << urand(rng, -0.75, 0.75);
  std::vector<double> alpha{urand(rng), urand(rng), urand(rng)};

  const CMatrix oracle = rotation_gate(Axis::Y, x(0)) *
                         u3_gate(alpha[0], alpha[1], alpha[2]) *
                         rotation_gate(Axis::Y, x(0));
  CHECK(max_abs(build_encoding(x, alpha, cfg) - oracle) <= 1e-15);
}

TEST_CASE("encoding column equals the first column of the full operator") {
  std::mt19937_64 rng(23);
  const AnsatzConfig cfg{2, 1, 1, 3, 2};
  RVector x(2);
  x << urand(rng, -0.75, 0.75), urand(rng, -0.75, 0.75);
  std::vector<double> alpha(3 * cfg.n_e * cfg.reuploads);
  for (double& a : alpha) a = urand(rng, -kPi, kPi);

  const CMatrix v = build_encoding(x, alpha, cfg);
  const CVector col = encoding_column(x, alpha, cfg);
  CHECK(max_abs(v.col(0) - col) <= 1e-15);
}

TEST_CASE("input variables replicate onto extra qubits") {
  // one variable on two E qubits: both chains see the same angle
  const AnsatzConfig cfg{2, 1, 1, 0, 1};
  RVector x(1);
  x << 0.31;
  const CMatrix v = build_encoding(x, {}, cfg);
  const CMatrix per_qubit = rotation_gate(Axis::Y, 0.31);
  CHECK(max_abs(v - tensor_product(per_qubit, per_qubit)) <= 1e-15);
}

TEST_CASE("encoding rejects wrong slice lengths") {
  const AnsatzConfig cfg{1, 1, 1, 1, 1};
  RVector x(1);
  x << 0.1;
  CHECK_THROWS_AS(build_encoding(x, {}, cfg), ShapeError);
  CHECK_THROWS_AS(encoding_column(RVector::Zero(2), std::vector<double>(3, 0.0), cfg),
                  ShapeError);
}

TEST_CASE("evolution with zero angles is the CZ layer") {
  const AnsatzConfig cfg{1, 1, 1, 0, 1};
  const std::vector<double> w_params(3 * 2 * 1 + 3 * 1, 0.0);
  const CMatrix w = build_evolution(w_params, cfg);
  const RVector cz = cz_all_em_diag(cfg.split());
  CHECK(max_abs(w - CMatrix(cz.cast<Complex>().asDiagonal())) <= 1e-15);
}

TEST_CASE("evolution with zero angles composes L identical CZ layers") {
  const AnsatzConfig cfg{1, 2, 3, 0, 1};
  const std::vector<double> w_params(3 * 3 * 3 + 3, 0.0);
  const CMatrix w = build_evolution(w_params, cfg);
  const CMatrix cz = CMatrix(cz_all_em_diag(cfg.split()).cast<Complex>().asDiagonal());
  CHECK(max_abs(w - cz * cz * cz) <= 1e-15);
}

TEST_CASE("evolution matches a hand-composed two-qubit product") {
  std::mt19937_64 rng(24);
  const AnsatzConfig cfg{1, 1, 1, 0, 1};
  std::vector<double> p(9);
  for (double& v : p) v = urand(rng, -kPi, kPi);

  const CMatrix layer = tensor_product(u3_gate(p[0], p[1], p[2]), u3_gate(p[3], p[4], p[5]));
  const CMatrix cz = CMatrix(cz_all_em_diag(cfg.split()).cast<Complex>().asDiagonal());
  const CMatrix final_col = tensor_product(u3_gate(p[6], p[7], p[8]), CMatrix::Identity(2, 2));
  const CMatrix oracle = final_col * cz * layer;

  CHECK(max_abs(build_evolution(p, cfg) - oracle) <= 1e-14);
}

TEST_CASE("built operators stay unitary over random draws") {
  std::mt19937_64 rng(25);
  for (const AnsatzConfig cfg : {test::case_a(), test::case_b(), test::case_c()}) {
    const ParameterLayout layout(cfg);
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<double> w_params(layout.w_size());
      for (double& v : w_params) v = urand(rng, -kPi, kPi);
      CHECK(unitarity_dev(build_evolution(w_params, cfg)) <= tol::kUnitary);

      std::vector<double> alpha(layout.alpha_size());
      for (double& v : alpha) v = urand(rng, -kPi, kPi);
      RVector x(cfg.n_inputs);
      for (int i = 0; i < cfg.n_inputs; ++i) x(i) = urand(rng, -0.75, 0.75);
      CHECK(unitarity_dev(build_encoding(x, alpha, cfg)) <= tol::kUnitary);
    }
  }
}

TEST_CASE("CZ layer is order independent") {
  std::mt19937_64 rng(26);
  const RegisterSplit split{2, 3};
  const int n = split.n_qubits();

  std::vector<std::pair<int, int>> pairs;
  for (int e = 0; e < split.n_e; ++e)
    for (int m = split.n_e; m < n; ++m) pairs.emplace_back(e, m);

  const auto compose = [&](const std::vector<std::pair<int, int>>& order) {
    RVector diag = RVector::Ones(split.dim());
    for (const auto& [e, m] : order) {
      for (int b = 0; b < split.dim(); ++b) {
        const int be = (b >> (n - 1 - e)) & 1;
        const int bm = (b >> (n - 1 - m)) & 1;
        if (be && bm) diag(b) = -diag(b);
      }
    }
    return diag;
  };

  const RVector reference = compose(pairs);
  CHECK((reference - cz_all_em_diag(split)).cwiseAbs().maxCoeff() == 0.0);
  for (int rep = 0; rep < 5; ++rep) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    CHECK((compose(pairs) - reference).cwiseAbs().maxCoeff() <= 1e-13);
  }
}

TEST_CASE("splitting the evolution operator into row blocks") {
  const RegisterSplit split{1, 1};
  const auto blocks = split_w_blocks(CMatrix::Identity(4, 4), split);
  REQUIRE(blocks.size() == 2);
  CMatrix top(2, 4), bottom(2, 4);
  top << 1, 0, 0, 0, 0, 1, 0, 0;
  bottom << 0, 0, 1, 0, 0, 0, 0, 1;
  CHECK(max_abs(blocks[0] - top) == 0.0);
  CHECK(max_abs(blocks[1] - bottom) == 0.0);

  std::mt19937_64 rng(27);
  const RegisterSplit split2{2, 1};
  const CMatrix w = test::random_unitary(split2.dim(), rng);
  const auto parts = split_w_blocks(w, split2);

  CMatrix stacked(split2.dim(), split2.dim());
  for (int i = 0; i < split2.dim_e(); ++i) {
    stacked.middleRows(i * split2.dim_m(), split2.dim_m()) = parts[i];
  }
  CHECK(max_abs(stacked - w) == 0.0);

  // column orthonormality: sum_i (W^i)^dag W^i = I for unitary W
  CMatrix acc = CMatrix::Zero(split2.dim(), split2.dim());
  for (const CMatrix& p : parts) acc += p.adjoint() * p;
  CHECK(max_abs(acc - CMatrix::Identity(split2.dim(), split2.dim())) <= 1e-14);

  CHECK_THROWS_AS(split_w_blocks(CMatrix::Identity(2, 2), split2), ShapeError);
}

}  // TEST_SUITE
