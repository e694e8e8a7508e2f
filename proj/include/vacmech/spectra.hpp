#ifndef VACMECH_SPECTRA_HPP
#define VACMECH_SPECTRA_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "model.hpp"

namespace vacmech {

// ---------------------------------------------------------------- eigensolve

struct EigenSolution {
    VectorXd values;   // ascending
    MatrixXcd vectors; // columns; gauge fixed so the largest component of each is real positive
    SpacePtr space;
};

namespace detail {

// Deterministic eigenvector gauge: rotate each column so its largest-magnitude
// entry is real and positive. Keeps CSV output bit-stable across runs.
inline void fix_gauge(MatrixXcd& V) {
    for (Eigen::Index c = 0; c < V.cols(); ++c) {
        Eigen::Index imax = 0;
        double best = -1.0;
        for (Eigen::Index r = 0; r < V.rows(); ++r) {
            const double m = std::abs(V(r, c));
            if (m > best) {
                best = m;
                imax = r;
            }
        }
        const cplx z = V(imax, c);
        if (std::abs(z) > 0.0) V.col(c) *= std::conj(z) / std::abs(z);
    }
}

inline void fix_gauge_real(MatrixXd& V) {
    for (Eigen::Index c = 0; c < V.cols(); ++c) {
        Eigen::Index imax = 0;
        V.col(c).cwiseAbs().maxCoeff(&imax);
        if (V(imax, c) < 0.0) V.col(c) = -V.col(c);
    }
}

// All model Hamiltonians are real in the Fock basis; the real path keeps the
// eigenvectors exactly real, which the dynamics engine relies on.
inline void eigensolve_real(const MatrixXd& H, VectorXd& E, MatrixXd& V) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(H);
    if (es.info() != Eigen::Success) throw NoConvergence("real symmetric eigensolver failed");
    E = es.eigenvalues();
    V = es.eigenvectors();
    fix_gauge_real(V);
}

}  // namespace detail

inline EigenSolution eigensolve(const OperatorMatrix& H) {
    const MatrixXcd& M = H.matrix();
    if ((M - M.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
        throw NotHermitian("matrix is not Hermitian within 1e-10");
    EigenSolution sol;
    sol.space = H.space();
    if (M.imag().cwiseAbs().maxCoeff() < 1e-12) {
        VectorXd E;
        MatrixXd V;
        detail::eigensolve_real(M.real(), E, V);
        sol.values = E;
        sol.vectors = V.cast<cplx>();
    } else {
        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(M);
        if (es.info() != Eigen::Success) throw NoConvergence("Hermitian eigensolver failed");
        sol.values = es.eigenvalues();
        sol.vectors = es.eigenvectors();
        detail::fix_gauge(sol.vectors);
    }
    return sol;
}

// ---------------------------------------------------------------- sweeps

struct SpectrumSweep {
    std::string axis_name;
    std::vector<double> axis_values;
    // tracked_levels[l][j] = E_l - E_0 at axis point j, levels followed by
    // eigenvector overlap with the previous point (adiabatic continuation)
    std::vector<std::vector<double>> tracked_levels;
    std::vector<double> overlap_continuity;  // per point: min over levels of the matched overlap
};

// Tracks the lowest n_levels branches of the spectrum across the grid.
// Eigensolves run in parallel chunks; the matching pass is sequential.
inline SpectrumSweep sweep(const ModelParams& p, const std::string& axis, const std::vector<double>& grid,
                           int n_levels) {
    if (grid.size() < 2) throw ValidationError("sweep grid needs at least 2 points");
    for (std::size_t j = 1; j < grid.size(); ++j)
        if (!(grid[j] > grid[j - 1])) throw ValidationError("sweep grid must be strictly increasing");
    HamiltonianAssembler asmb(p);
    const int dim = asmb.space()->dim();
    if (n_levels < 1 || n_levels > dim) throw ValidationError("n_levels out of range");

    SpectrumSweep out;
    out.axis_name = axis;
    out.axis_values = grid;
    out.tracked_levels.assign(static_cast<std::size_t>(n_levels), std::vector<double>(grid.size(), 0.0));
    out.overlap_continuity.assign(grid.size(), 1.0);

    // prev_vecs holds the tracked branches' eigenvectors at the previous point
    MatrixXd prev_vecs;
    std::vector<double> prev_energy(static_cast<std::size_t>(n_levels), 0.0);
    std::vector<int> order(static_cast<std::size_t>(n_levels));

    const std::size_t chunk = 16;
    std::vector<VectorXd> Es(chunk);
    std::vector<MatrixXd> Vs(chunk);
    for (std::size_t start = 0; start < grid.size(); start += chunk) {
        const std::size_t count = std::min(chunk, grid.size() - start);
        parallel_for(count, [&](std::size_t i) {
            const MatrixXd H = asmb.bare(with_axis(p, axis, grid[start + i]));
            detail::eigensolve_real(H, Es[i], Vs[i]);
        });
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j = start + i;
            if (j == 0) {
                for (int l = 0; l < n_levels; ++l) order[static_cast<std::size_t>(l)] = l;
            } else {
                // greedy assignment, branches claimed in order of best overlap;
                // overlap ties resolved by energy proximity to the branch
                MatrixXd ov = (prev_vecs.transpose() * Vs[i]).cwiseAbs();  // n_levels x dim
                std::vector<bool> taken(static_cast<std::size_t>(dim), false);
                std::vector<bool> assigned(static_cast<std::size_t>(n_levels), false);
                double worst = 1.0;
                for (int pass = 0; pass < n_levels; ++pass) {
                    int bl = -1, bc = -1;
                    double best = -1.0, best_edist = 0.0;
                    for (int l = 0; l < n_levels; ++l) {
                        if (assigned[static_cast<std::size_t>(l)]) continue;
                        const double e_prev = prev_energy[static_cast<std::size_t>(l)];
                        for (int c = 0; c < dim; ++c) {
                            if (taken[static_cast<std::size_t>(c)]) continue;
                            const double edist = std::abs(Es[i](c) - e_prev);
                            if (ov(l, c) > best + 1e-12 ||
                                (std::abs(ov(l, c) - best) <= 1e-12 && edist < best_edist)) {
                                best = ov(l, c);
                                best_edist = edist;
                                bl = l;
                                bc = c;
                            }
                        }
                    }
                    assigned[static_cast<std::size_t>(bl)] = true;
                    taken[static_cast<std::size_t>(bc)] = true;
                    order[static_cast<std::size_t>(bl)] = bc;
                    worst = std::min(worst, best);
                }
                out.overlap_continuity[j] = worst;
            }
            const double e0 = Es[i](0);
            for (int l = 0; l < n_levels; ++l)
                out.tracked_levels[static_cast<std::size_t>(l)][j] = Es[i](order[static_cast<std::size_t>(l)]) - e0;
            prev_vecs.resize(dim, n_levels);
            for (int l = 0; l < n_levels; ++l) {
                prev_vecs.col(l) = Vs[i].col(order[static_cast<std::size_t>(l)]);
                prev_energy[static_cast<std::size_t>(l)] = Es[i](order[static_cast<std::size_t>(l)]);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- crossings

struct CompositionEntry {
    std::string label;  // bare basis label, |g,1,0> style
    cplx amplitude;
};

struct CrossingReport {
    int level_lo = 0, level_hi = 0;      // the (i, i+1) pair
    double axis_value_at_min = 0.0;
    double splitting = 0.0;              // E_hi - E_lo at the minimum
    std::vector<CompositionEntry> composition_lo, composition_hi;
    int resonance_order = 0;             // |mech-occupation difference| of the dominant bare labels
};

inline std::vector<CompositionEntry> state_composition(const EigenSolution& sol, int level, int top_k) {
    const int dim = static_cast<int>(sol.values.size());
    if (level < 0 || level >= dim) throw IndexOutOfRange("level " + std::to_string(level));
    std::vector<int> idx(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) idx[static_cast<std::size_t>(i)] = i;
    const VectorXcd v = sol.vectors.col(level);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return std::abs(v(a)) > std::abs(v(b)); });
    std::vector<CompositionEntry> out;
    const int k = std::min(top_k, dim);
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i)
        out.push_back({sol.space->basis_label(idx[static_cast<std::size_t>(i)]), v(idx[static_cast<std::size_t>(i)])});
    return out;
}

namespace detail {

inline double gap_at(const HamiltonianAssembler& asmb, const ModelParams& p, const std::string& axis, double x,
                     int lo_level, int hi_level) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(asmb.bare(with_axis(p, axis, x)), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NoConvergence("eigensolver failed during gap evaluation");
    return es.eigenvalues()(hi_level) - es.eigenvalues()(lo_level);
}

// mechanical occupation of the largest-|amplitude| bare component
inline int dominant_mech_occupation(const HilbertSpace& sp, const VectorXcd& v) {
    Eigen::Index imax = 0;
    v.cwiseAbs().maxCoeff(&imax);
    const auto occ = sp.unpack(static_cast<int>(imax));
    return occ[static_cast<std::size_t>(sp.qubit_count())];  // mech is the first bosonic mode
}

}  // namespace detail

// Minimizes E_{hi} - E_{lo} over the bracket with golden-section search.
// A 101-point pre-scan certifies that the bracket holds exactly one interior
// minimum before the search starts.
inline CrossingReport find_min_splitting(const ModelParams& p, const std::string& axis,
                                         double lo, double hi, std::pair<int, int> level_pair,
                                         double axis_tol = 1e-8, int top_k = 6) {
    if (!(hi > lo)) throw ValidationError("bracket must satisfy lo < hi");
    const int l0 = level_pair.first, l1 = level_pair.second;
    if (l1 != l0 + 1 || l0 < 0) throw ValidationError("level pair must be adjacent (i, i+1)");
    HamiltonianAssembler asmb(p);
    if (l1 >= asmb.space()->dim()) throw IndexOutOfRange("level pair exceeds space dimension");

    const int n_scan = 101;
    std::vector<double> xs(n_scan), gaps(n_scan);
    for (int i = 0; i < n_scan; ++i) xs[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n_scan - 1);
    parallel_for(static_cast<std::size_t>(n_scan), [&](std::size_t i) {
        gaps[i] = detail::gap_at(asmb, p, axis, xs[i], l0, l1);
    });
    int imin = 0;
    for (int i = 1; i < n_scan; ++i)
        if (gaps[static_cast<std::size_t>(i)] < gaps[static_cast<std::size_t>(imin)]) imin = i;
    if (imin == 0 || imin == n_scan - 1)
        throw NoBracketedMinimum("gap minimum sits on the bracket edge");
    // unimodality: strictly decreasing before the minimum, increasing after,
    // up to eigensolver noise
    const double noise = 1e-12 * std::max(1.0, std::abs(gaps[static_cast<std::size_t>(imin)]));
    for (int i = 1; i <= imin; ++i)
        if (gaps[static_cast<std::size_t>(i)] > gaps[static_cast<std::size_t>(i - 1)] + noise)
            throw NoBracketedMinimum("gap is not unimodal in the bracket (rises before the minimum)");
    for (int i = imin + 1; i < n_scan; ++i)
        if (gaps[static_cast<std::size_t>(i)] + noise < gaps[static_cast<std::size_t>(i - 1)])
            throw NoBracketedMinimum("gap is not unimodal in the bracket (falls after the minimum)");

    double a = xs[static_cast<std::size_t>(imin - 1)], b = xs[static_cast<std::size_t>(imin + 1)];
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = detail::gap_at(asmb, p, axis, c, l0, l1);
    double fd = detail::gap_at(asmb, p, axis, d, l0, l1);
    while (b - a > axis_tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = detail::gap_at(asmb, p, axis, c, l0, l1);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = detail::gap_at(asmb, p, axis, d, l0, l1);
        }
    }
    const double xmin = 0.5 * (a + b);

    CrossingReport rep;
    rep.level_lo = l0;
    rep.level_hi = l1;
    rep.axis_value_at_min = xmin;
    const ModelParams pm = with_axis(p, axis, xmin);
    EigenSolution sol = eigensolve({asmb.space(), asmb.bare(pm).cast<cplx>()});
    rep.splitting = sol.values(l1) - sol.values(l0);
    rep.composition_lo = state_composition(sol, l0, top_k);
    rep.composition_hi = state_composition(sol, l1, top_k);
    const int k_lo = detail::dominant_mech_occupation(*sol.space, sol.vectors.col(l0));
    const int k_hi = detail::dominant_mech_occupation(*sol.space, sol.vectors.col(l1));
    rep.resonance_order = std::abs(k_hi - k_lo);
    return rep;
}

// ---------------------------------------------------------------- unperturbed ladder

struct Occupation {
    std::vector<int> qubits;  // 0 = ground, 1 = excited, one entry per atom
    std::vector<int> modes;   // mech occupation first, then cavity mode(s)
};

// Closed-form eigenvalues of the uncoupled polaron-frame Hamiltonian,
// including the Kerr shift of the photon number.
inline double unperturbed_energy(const ModelParams& p, const Occupation& occ) {
    switch (p.kind) {
        case ModelKind::SingleAtomSingleMode: {
            if (occ.qubits.size() != 1 || occ.modes.size() != 2)
                throw WrongModel("occupation labels do not match the single-atom single-mode model");
            const double k = occ.modes[0], n = occ.modes[1];
            return p.omega_c * n + omega_m * k + p.omega_a * occ.qubits[0] - p.g * p.g * n * n / omega_m;
        }
        case ModelKind::SingleAtomTwoModes: {
            if (occ.qubits.size() != 1 || occ.modes.size() != 3)
                throw WrongModel("occupation labels do not match the single-atom two-mode model");
            const double k = occ.modes[0], n1 = occ.modes[1], n2 = occ.modes[2];
            const double c2 = p.omega_c2 / p.omega_c1;  // c^2 of the hybridized-mode rotation
            const double kerr = n1 * n1 + 2.0 * c2 * n1 * n2 + c2 * c2 * n2 * n2 +
                                c2 * n1 * (n2 + 1.0) + c2 * n2 * (n1 + 1.0);
            return p.omega_c1 * n1 + p.omega_c2 * n2 + omega_m * k + p.omega_a * occ.qubits[0] -
                   p.g * p.g * kerr / omega_m;
        }
        case ModelKind::TwoAtomsSingleMode: {
            if (occ.qubits.size() != 2 || occ.modes.size() != 2)
                throw WrongModel("occupation labels do not match the two-atom model");
            const double k = occ.modes[0], n = occ.modes[1];
            return p.omega_c * n + omega_m * k + p.omega_a1 * occ.qubits[0] + p.omega_a2 * occ.qubits[1] -
                   p.g * p.g * n * n / omega_m;
        }
    }
    throw WrongModel("unknown model kind");
}

}  // namespace vacmech

#endif
