// SPDX-License-Identifier: Apache-2.0
//
// Hybrid analog/digital filters: projected-gradient factorization of
// digital targets, Eckart-Young truncation, and alternating-minimization
// designs.
//
// A factorization target is a grid of blocks F[u][k] (n_ant x N_s) that
// share one RF matrix. Each block carries a power target c[u][k]; the
// hybrid block is rescaled to ||F_RF F_BB[u][k]||_F^2 = c[u][k].

#ifndef MMW_HYBRID_HPP
#define MMW_HYBRID_HPP

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <vector>

#include "mmw/config.hpp"
#include "mmw/digital.hpp"
#include "mmw/linalg.hpp"

namespace mmw {

enum class FilterSide { bs_combiner, ms_precoder };

struct HybridFilter {
    CMatrix rf;           // n_ant x l_chains, unit modulus
    MatrixGrid bb;        // [u][k] l_chains x N_s
    FilterSide side = FilterSide::bs_combiner;

    CMatrix block(std::size_t u, std::size_t k) const { return rf * bb[u][k]; }
    MatrixGrid product() const;
};

struct TraceEntry {
    int iteration = 0;
    double distortion = 0.0;
    double step = 0.0;  // step size accepted at this iteration; 0 for the initial point
};

struct FactorizationTrace {
    std::vector<TraceEntry> entries;
    bool step_floor_hit = false;  // inner loop reached the step floor
    int skipped_terms = 0;        // blocks with ||A|| = 0 left out of a gradient

    /// Columns iteration, distortion, step.
    void write_csv(std::ostream& os) const;
};

struct FactorizationTarget {
    MatrixGrid blocks;                       // [u][k]
    std::vector<std::vector<double>> power;  // [u][k] c

    CMatrix stacked() const { return hstack(blocks); }
};

/// Every block gets the same power target.
FactorizationTarget budget_target(MatrixGrid blocks, double power);
/// Each block keeps its own squared norm.
FactorizationTarget norm_target(MatrixGrid blocks);

struct BasebandResult {
    MatrixGrid bb;                           // scaled
    std::vector<std::vector<double>> theta;  // per-block scale that was applied
};

/// F_BB = F_RF^+ F, then each block scaled to its power target. Throws when
/// a block's projection has zero norm.
BasebandResult ls_baseband(const FactorizationTarget& target, const CMatrix& rf);

/// sum_{u,k} ||F||^2 - 2 sqrt(c) ||A|| + c with
/// A = (F_RF^H F_RF)^{-1/2} F_RF^H F.
double distortion(const FactorizationTarget& target, const CMatrix& rf);

/// d(distortion)/d(conj F_RF). Blocks with ||A|| = 0 are skipped and counted
/// in *skipped.
CMatrix distortion_gradient(const FactorizationTarget& target, const CMatrix& rf,
                            int* skipped = nullptr);

struct EckartYoung {
    CMatrix approx;   // best rank-l approximation of the stacked target
    CMatrix rf_init;  // phases of the leading l left singular vectors
    double error2 = 0.0;  // sum of discarded squared singular values
};

EckartYoung eckart_young(const CMatrix& stacked, int l_chains);

enum class HdPgInit { random, eckart_young };

struct HdPgOptions {
    HdPgInit init = HdPgInit::eckart_young;
    double s0 = 1.0;
    /// When true the trial step of every outer iteration is
    /// s0 * ||F_RF|| / ||gradient||, so s0 is dimensionless.
    bool relative_step = true;
    double delta_rel = 1e-6;  // stop once the improvement < delta_rel * initial distortion
    int max_iter = 200;
    double step_floor = 1e-12;
    int quant_bits = 4;  // phase resolution of the random initializer
};

struct HdPgResult {
    HybridFilter filter;
    FactorizationTrace trace;
};

/// Projected gradient descent on the RF matrix followed by the scaled LS
/// baseband. `rng` is used only by the random initializer.
HdPgResult hd_pg(const FactorizationTarget& target, int l_chains, FilterSide side,
                 const HdPgOptions& opt, std::mt19937_64& rng);

/// Phases of the leading l_ms right singular vectors of the stack of
/// H_u^H[k] over k. h_u[k] is H_u[k] (n_ms x n_bs).
CMatrix am_rf_precoder(const std::vector<CMatrix>& h_u, int l_ms);

/// Baseband precoders maximizing mutual information on the equivalent
/// channels H_u^H[k] T_RF, with ||T_RF T_BB||^2 = power.
std::vector<CMatrix> am_bb_precoder(const std::vector<CMatrix>& h_u, const CMatrix& rf,
                                    int n_streams, double power, double noise_var);

/// Hybrid UL precoders for all users built from am_rf_precoder and
/// am_bb_precoder.
std::vector<HybridFilter> am_precoders(const MatrixGrid& h, const SystemConfig& cfg,
                                       double noise_var);

struct AmOptions {
    int max_iter = 50;
    double tol = 1e-6;  // relative change of sum-MSE
};

struct AmResult {
    HybridFilter filter;
    std::vector<double> sum_mse;       // scale-optimal sum-MSE after each iteration
    std::vector<double> best_sum_mse;  // best so far, non-increasing
    int fallbacks = 0;                 // CB baseband blocks with an empty nullspace
};

/// Alternates the RF combiner update with the baseband update of the chosen
/// kind; returns the best iterate. precoders[u][k] are the full UL precoders
/// (T_RF T_BB). The final baseband blocks are scaled to P_tx / (U * N_s).
AmResult am_combiner(const MatrixGrid& h, const MatrixGrid& precoders, int l_bs,
                     CombinerKind kind, double noise_var, double block_power,
                     const AmOptions& opt = {});

}  // namespace mmw

#endif  // MMW_HYBRID_HPP
