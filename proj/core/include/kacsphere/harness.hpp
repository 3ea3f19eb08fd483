#pragma once

#include <optional>

#include "kacsphere/transport.hpp"

namespace kacsphere {

struct EntropyIdentityReport {
  double direct = 0.0;     // ∫ F_j log F_j dσ^N evaluated pointwise on the line
  double assembled = 0.0;  // H(Π₁|γ) - log(|S^{N-2}|√2π/(|S^{N-1}|√N)) - ½∫v²Π₁ - ((N-3)/2)∫Π₁log(1-v²/N)
  double difference = 0.0;
};

EntropyIdentityReport entropy_identity(const SphereDensity& F);

struct CorrectionConstants {
  double c_p = 0.0;   // (∫_{|x|<1} |log(1-x²)|^{p/(p-1)} dx)^{(p-1)/p}
  double l_n = 0.0;   // sqrt(sup_{x ∈ [0, ε_N]} x log²x)
  double beta = 0.0;
  double eps_n = 0.0;  // N^{-β}
};

CorrectionConstants correction_constants(double p, int N, double beta);

enum class CorrectionVariant { LineFisher, SphereFisher };

// RHS - LHS of the pole-correction bound with R = sqrt(N(1-ε_N)), ε_N = N^{-β};
// LHS = -½∫v²Π₁ - ((N-3)/2)∫Π₁ log(1-v²/N)
double correction_bound_check(const SphereDensity& F, double k, double beta, double p,
                              CorrectionVariant variant);

// N·Π_j(Σ_i a_{j,i}/N)^{1/p_j} - Σ_i Π_j a_{j,i}^{1/p_j} for Σ 1/p_j <= 1
double holder_type_check(const std::vector<std::vector<double>>& a, const std::vector<double>& p);

struct ChainStep {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  bool pass = false;
  bool skipped = false;
  std::string note;
};

struct InequalityReport {
  std::string family;
  int N = 0;
  double k = 0.0, q = 0.0, p = 0.0, beta = 0.0;
  std::vector<ChainStep> steps;
  std::optional<double> ratio;        // partial_entropy_sum / H_N, undefined when H_N ~ 0
  std::optional<double> epsilon_hat;  // ratio - 1
  double partial_sum = 0.0;
  double h_n = 0.0;

  bool all_pass() const;
};

// Runs the full verification chain and composes the explicit end-to-end bound
// partial_entropy_sum <= H_N + Δ(N) from the measured step quantities.
InequalityReport verify_chain(const SphereDensity& F, double k, double q, double p, double beta);

void write_chain_csv(const std::string& path, const std::vector<InequalityReport>& reports);

}  // namespace kacsphere
