#ifndef VACMECH_MODEL_HPP
#define VACMECH_MODEL_HPP

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "fock.hpp"

namespace vacmech {

// Natural units: hbar = 1 and omega_m = 1; every frequency and rate below is
// a dimensionless multiple of the mechanical frequency.
inline constexpr double omega_m = 1.0;

enum class ModelKind { SingleAtomSingleMode, SingleAtomTwoModes, TwoAtomsSingleMode };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::SingleAtomSingleMode: return "single_atom_single_mode";
        case ModelKind::SingleAtomTwoModes: return "single_atom_two_modes";
        case ModelKind::TwoAtomsSingleMode: return "two_atoms_single_mode";
    }
    return "?";
}

struct ModelParams {
    ModelKind kind = ModelKind::SingleAtomSingleMode;
    // single-cavity kinds use omega_c; the two-mode kind uses omega_c1/2
    double omega_c = 0.0, omega_c1 = 0.0, omega_c2 = 0.0;
    // single-atom kinds use omega_a; the two-atom kind uses omega_a1/2
    double omega_a = 0.0, omega_a1 = 0.0, omega_a2 = 0.0;
    double g = 0.0;
    double lambda = 0.0, lambda1 = 0.0, lambda2 = 0.0;
    int cutoff_phonon = 6;
    int cutoff_photon = 6;   // single-cavity kinds
    int cutoff_photon1 = 5;  // two-mode kind
    int cutoff_photon2 = 5;
    long dim_ceiling = 20000;

    double beta() const { return g / omega_m; }

    void validate() const {
        auto pos = [](double v, const char* name) {
            if (!(v > 0.0)) throw ValidationError(std::string(name) + " must be > 0");
        };
        auto nonneg = [](double v, const char* name) {
            if (!(v >= 0.0)) throw ValidationError(std::string(name) + " must be >= 0");
        };
        nonneg(g, "g");
        switch (kind) {
            case ModelKind::SingleAtomSingleMode:
                pos(omega_c, "omega_c");
                pos(omega_a, "omega_a");
                nonneg(lambda, "lambda");
                break;
            case ModelKind::SingleAtomTwoModes:
                pos(omega_c1, "omega_c1");
                pos(omega_c2, "omega_c2");
                pos(omega_a, "omega_a");
                nonneg(lambda, "lambda");
                break;
            case ModelKind::TwoAtomsSingleMode:
                pos(omega_c, "omega_c");
                pos(omega_a1, "omega_a1");
                pos(omega_a2, "omega_a2");
                nonneg(lambda1, "lambda1");
                nonneg(lambda2, "lambda2");
                break;
        }
    }
};

inline ModelParams single_atom_single_mode(double omega_c, double omega_a, double g, double lambda,
                                           int cut_phonon = 6, int cut_photon = 6) {
    ModelParams p;
    p.kind = ModelKind::SingleAtomSingleMode;
    p.omega_c = omega_c;
    p.omega_a = omega_a;
    p.g = g;
    p.lambda = lambda;
    p.cutoff_phonon = cut_phonon;
    p.cutoff_photon = cut_photon;
    return p;
}

inline ModelParams single_atom_two_modes(double omega_c1, double omega_c2, double omega_a, double g,
                                         double lambda, int cut_phonon = 6, int cut_photon1 = 5,
                                         int cut_photon2 = 5) {
    ModelParams p;
    p.kind = ModelKind::SingleAtomTwoModes;
    p.omega_c1 = omega_c1;
    p.omega_c2 = omega_c2;
    p.omega_a = omega_a;
    p.g = g;
    p.lambda = lambda;
    p.cutoff_phonon = cut_phonon;
    p.cutoff_photon1 = cut_photon1;
    p.cutoff_photon2 = cut_photon2;
    return p;
}

inline ModelParams two_atoms_single_mode(double omega_c, double omega_a1, double omega_a2, double g,
                                         double lambda1, double lambda2, int cut_phonon = 6,
                                         int cut_photon = 6) {
    ModelParams p;
    p.kind = ModelKind::TwoAtomsSingleMode;
    p.omega_c = omega_c;
    p.omega_a1 = omega_a1;
    p.omega_a2 = omega_a2;
    p.g = g;
    p.lambda1 = lambda1;
    p.lambda2 = lambda2;
    p.cutoff_phonon = cut_phonon;
    p.cutoff_photon = cut_photon;
    return p;
}

// Subsystem order (qubits first, then mech, then cavity modes):
//   single atom + one cavity : |j, k, n>
//   single atom + two modes  : |j, k, n1, n2>
//   two atoms + one cavity   : |j1, j2, k, n>
inline SpacePtr make_space(const ModelParams& p) {
    p.validate();
    switch (p.kind) {
        case ModelKind::SingleAtomSingleMode:
            return build_space({{p.cutoff_phonon, "mech"}, {p.cutoff_photon, "cavity"}}, 1, p.dim_ceiling);
        case ModelKind::SingleAtomTwoModes:
            return build_space({{p.cutoff_phonon, "mech"}, {p.cutoff_photon1, "cavity1"}, {p.cutoff_photon2, "cavity2"}},
                               1, p.dim_ceiling);
        case ModelKind::TwoAtomsSingleMode:
            return build_space({{p.cutoff_phonon, "mech"}, {p.cutoff_photon, "cavity"}}, 2, p.dim_ceiling);
    }
    throw ValidationError("unknown model kind");
}

struct HybridizedModes {
    double c;              // sqrt(omega_c2 / omega_c1)
    double G;              // (1 + c^2) g
    double Delta;          // omega_c1 - omega_c2
    double omega_tilde_c1; // omega_c2 + Delta c^2 / (1 + c^2)
    double omega_tilde_c2; // omega_c2 + Delta / (1 + c^2)
};

inline HybridizedModes hybridize(const ModelParams& p) {
    if (p.kind != ModelKind::SingleAtomTwoModes)
        throw WrongModel("hybridize requires the single-atom two-mode model");
    HybridizedModes h;
    h.c = std::sqrt(p.omega_c2 / p.omega_c1);
    h.G = (1.0 + h.c * h.c) * p.g;
    h.Delta = p.omega_c1 - p.omega_c2;
    h.omega_tilde_c1 = p.omega_c2 + h.Delta * h.c * h.c / (1.0 + h.c * h.c);
    h.omega_tilde_c2 = p.omega_c2 + h.Delta / (1.0 + h.c * h.c);
    return h;
}

// ---------------------------------------------------------------- assembler
//
// Precomputes the parameter-independent operator blocks of one model family
// (fixed kind + cutoffs), so that a Hamiltonian at any coupling/frequency
// values is a weighted sum of stored matrices. Parameter sweeps and crossing
// searches then pay only for diagonalization, not operator algebra.
// All matrices are real in this basis (every coupling is real).
class HamiltonianAssembler {
public:
    explicit HamiltonianAssembler(const ModelParams& base) : base_(base), space_(make_space(base)) {
        const int n_modes = static_cast<int>(space_->modes().size());
        b_ = annihilator(space_, 0).matrix().real();
        for (int m = 1; m < n_modes; ++m) a_.push_back(annihilator(space_, m).matrix().real());
        for (int q = 0; q < space_->qubit_count(); ++q) sm_.push_back(qubit_lowering(space_, q).matrix().real());

        const MatrixXd bpb = b_ + b_.transpose();
        Nb_ = number_operator(space_, 0).matrix().real();
        for (std::size_t m = 0; m < a_.size(); ++m) Na_.push_back(a_[m].transpose() * a_[m]);
        for (std::size_t q = 0; q < sm_.size(); ++q) Pe_.push_back(sm_[q].transpose() * sm_[q]);

        switch (base_.kind) {
            case ModelKind::SingleAtomSingleMode:
            case ModelKind::TwoAtomsSingleMode: {
                const MatrixXd& a = a_[0];
                const MatrixXd ad = a.transpose();
                X_om_ = Na_[0] * bpb;
                X_dce_ = 0.5 * (a * a + ad * ad) * bpb;
                for (const auto& s : sm_) X_af_.push_back((a + ad) * (s + s.transpose()));
                break;
            }
            case ModelKind::SingleAtomTwoModes: {
                const MatrixXd &a1 = a_[0], &a2 = a_[1];
                const MatrixXd a1d = a1.transpose(), a2d = a2.transpose();
                X_mix11_ = (a1 * a1 + a1d * a1d + 2.0 * a1d * a1) * bpb;
                X_mix22_ = (a2 * a2 + a2d * a2d + 2.0 * a2d * a2) * bpb;
                X_mix12_ = (a1 * a2 + a1d * a2d + a1d * a2 + a2d * a1) * bpb;
                X_af_.push_back((a1 + a1d) * (sm_[0] + sm_[0].transpose()));
                break;
            }
        }
    }

    const SpacePtr& space() const { return space_; }
    const ModelParams& base_params() const { return base_; }
    const MatrixXd& mech_lowering() const { return b_; }
    const MatrixXd& cavity_lowering(int i) const { return a_.at(static_cast<std::size_t>(i)); }
    const MatrixXd& atom_lowering(int i) const { return sm_.at(static_cast<std::size_t>(i)); }
    const MatrixXd& cavity_number(int i) const { return Na_.at(static_cast<std::size_t>(i)); }
    const MatrixXd& atom_projector(int i) const { return Pe_.at(static_cast<std::size_t>(i)); }
    const MatrixXd& mech_number() const { return Nb_; }

    void require_same_family(const ModelParams& p) const {
        if (p.kind != base_.kind || p.cutoff_phonon != base_.cutoff_phonon ||
            p.cutoff_photon != base_.cutoff_photon || p.cutoff_photon1 != base_.cutoff_photon1 ||
            p.cutoff_photon2 != base_.cutoff_photon2)
            throw SpaceMismatch("parameters belong to a different model family than this assembler");
    }

    MatrixXd bare(const ModelParams& p) const {
        require_same_family(p);
        p.validate();
        switch (p.kind) {
            case ModelKind::SingleAtomSingleMode:
                return p.omega_c * Na_[0] + Nb_ + p.omega_a * Pe_[0] + p.g * X_om_ + p.g * X_dce_ +
                       p.lambda * X_af_[0];
            case ModelKind::TwoAtomsSingleMode:
                return p.omega_c * Na_[0] + Nb_ + p.omega_a1 * Pe_[0] + p.omega_a2 * Pe_[1] + p.g * X_om_ +
                       p.g * X_dce_ + p.lambda1 * X_af_[0] + p.lambda2 * X_af_[1];
            case ModelKind::SingleAtomTwoModes: {
                const double r = p.omega_c2 / p.omega_c1;
                return p.omega_c1 * Na_[0] + p.omega_c2 * Na_[1] + Nb_ + p.omega_a * Pe_[0] +
                       0.5 * p.g * (X_mix11_ + r * X_mix22_ - 2.0 * std::sqrt(r) * X_mix12_) +
                       p.lambda * X_af_[0];
            }
        }
        throw ValidationError("unknown model kind");
    }

    // Polaron-frame series expansion. series_order = highest retained power of
    // (g / omega_m) in both the pair-creation and the atom-coupling series.
    // The final symmetrization removes the anti-Hermitian residue that a
    // finite Fock cutoff leaves in the operator products (it vanishes in the
    // untruncated algebra).
    MatrixXd transformed(const ModelParams& p, int series_order) const {
        require_same_family(p);
        p.validate();
        if (series_order < 0) throw InvalidOrder("series_order must be >= 0");
        switch (p.kind) {
            case ModelKind::SingleAtomSingleMode:
            case ModelKind::TwoAtomsSingleMode:
                return transformed_single_cavity(p, series_order);
            case ModelKind::SingleAtomTwoModes:
                return transformed_two_modes(p, series_order);
        }
        throw ValidationError("unknown model kind");
    }

    // The two-mode Hamiltonian rebuilt from the hybridized-mode operators
    // (p and q below); must match bare() up to rounding, which the test
    // suite asserts. Kept public because it documents the change of basis.
    MatrixXd two_mode_hybrid_form(const ModelParams& pr) const {
        require_same_family(pr);
        if (pr.kind != ModelKind::SingleAtomTwoModes)
            throw WrongModel("hybrid form defined for the two-mode model only");
        const HybridizedModes hy = hybridize(pr);
        const double cc = hy.c, s = std::sqrt(1.0 + cc * cc);
        const MatrixXd pm = (cc * a_[0] + a_[1]) / s;
        const MatrixXd qm = (a_[0] - cc * a_[1]) / s;
        const MatrixXd pd = pm.transpose(), qd = qm.transpose();
        const MatrixXd bpb = b_ + b_.transpose();
        const MatrixXd& smm = sm_[0];
        const MatrixXd spp = smm.transpose();
        MatrixXd h = hy.omega_tilde_c1 * pd * pm + hy.omega_tilde_c2 * qd * qm + Nb_ + pr.omega_a * Pe_[0];
        h += 0.5 * hy.G * (qm * qm + qd * qd) * bpb;
        h += hy.G * qd * qm * bpb;
        h += pr.lambda / s * (cc * pd + cc * pm + qd + qm) * (smm + spp);
        h += hy.Delta * cc / (1.0 + cc * cc) * (pd * qm + qd * pm);
        return h;
    }

private:
    static double factorial(int n) {
        double f = 1.0;
        for (int i = 2; i <= n; ++i) f *= i;
        return f;
    }

    MatrixXd transformed_single_cavity(const ModelParams& p, int order) const {
        const double g = p.g;
        const MatrixXd& a = a_[0];
        const MatrixXd ad = a.transpose();
        const MatrixXd& na = Na_[0];
        const MatrixXd bmb = b_.transpose() - b_;
        const MatrixXd bpb = b_.transpose() + b_;
        MatrixXd h;
        if (p.kind == ModelKind::SingleAtomSingleMode)
            h = p.omega_c * na + Nb_ + p.omega_a * Pe_[0] - g * g * na * na;
        else
            h = p.omega_c * na + Nb_ + p.omega_a1 * Pe_[0] + p.omega_a2 * Pe_[1] - g * g * na * na;
        MatrixXd Bn = MatrixXd::Identity(space_->dim(), space_->dim());
        const MatrixXd aa = a * a, adad = ad * ad;
        for (int n = 0; n <= order; ++n) {
            if (n >= 1) Bn = bmb * Bn;
            const double sgn = (n % 2 == 0) ? 1.0 : -1.0;
            const MatrixXd A2 = adad + sgn * aa;
            const double c1 = g * std::pow(g, n) * std::pow(2.0, n - 1) / factorial(n);
            MatrixXd term = A2 * Bn * bpb;
            if (n >= 1) {
                const MatrixXd A2p = adad - sgn * aa;
                MatrixXd Bn1 = MatrixXd::Identity(space_->dim(), space_->dim());
                for (int i = 0; i < n - 1; ++i) Bn1 = bmb * Bn1;
                term -= static_cast<double>(n) * A2p * na * Bn1;
            }
            h += c1 * term;
            const MatrixXd A1 = ad + sgn * a;
            const double cn = std::pow(g, n) / factorial(n);
            if (p.kind == ModelKind::SingleAtomSingleMode) {
                h += p.lambda * cn * A1 * (sm_[0] + sm_[0].transpose()) * Bn;
            } else {
                h += p.lambda1 * cn * A1 * (sm_[0] + sm_[0].transpose()) * Bn;
                h += p.lambda2 * cn * A1 * (sm_[1] + sm_[1].transpose()) * Bn;
            }
        }
        return 0.5 * (h + h.transpose());
    }

    MatrixXd transformed_two_modes(const ModelParams& pr, int order) const {
        const HybridizedModes hy = hybridize(pr);
        const double cc = hy.c, G = hy.G, s = std::sqrt(1.0 + cc * cc);
        const MatrixXd pm = (cc * a_[0] + a_[1]) / s;
        const MatrixXd qm = (a_[0] - cc * a_[1]) / s;
        const MatrixXd pd = pm.transpose(), qd = qm.transpose();
        const MatrixXd nq = qd * qm;
        const MatrixXd bmb = b_.transpose() - b_;
        const MatrixXd bpb = b_.transpose() + b_;
        const MatrixXd& smm = sm_[0];
        const MatrixXd spp = smm.transpose();
        MatrixXd h = hy.omega_tilde_c1 * pd * pm + hy.omega_tilde_c2 * nq + Nb_ + pr.omega_a * Pe_[0] -
                     G * G * nq * nq;
        MatrixXd Bn = MatrixXd::Identity(space_->dim(), space_->dim());
        const MatrixXd qq = qm * qm, qdqd = qd * qd;
        for (int n = 0; n <= order; ++n) {
            if (n >= 1) Bn = bmb * Bn;
            const double sgn = (n % 2 == 0) ? 1.0 : -1.0;
            const MatrixXd Q2 = qdqd + sgn * qq;
            const double c1 = G * std::pow(G, n) * std::pow(2.0, n - 1) / factorial(n);
            MatrixXd term = Q2 * Bn * bpb;
            if (n >= 1) {
                const MatrixXd Q2p = qdqd - sgn * qq;
                MatrixXd Bn1 = MatrixXd::Identity(space_->dim(), space_->dim());
                for (int i = 0; i < n - 1; ++i) Bn1 = bmb * Bn1;
                term -= static_cast<double>(n) * Q2p * nq * Bn1;
            }
            h += c1 * term;
            if (n == 0) {
                // zeroth atom-coupling term keeps both hybridized components:
                // c p + q is proportional to the physical mode the atom sees
                h += pr.lambda / s * (cc * pd + cc * pm + qd + qm) * (smm + spp);
            } else {
                const double c2 = pr.lambda / s * std::pow(G, n) / factorial(n);
                h += c2 * (qd + sgn * qm) * (smm + spp) * Bn;
            }
            const double c3 = hy.Delta * cc / (1.0 + cc * cc) * std::pow(G, n) / factorial(n);
            h += c3 * (qd * pm + sgn * qm * pd) * Bn;
        }
        return 0.5 * (h + h.transpose());
    }

    ModelParams base_;
    SpacePtr space_;
    MatrixXd b_;
    std::vector<MatrixXd> a_, sm_;
    MatrixXd Nb_;
    std::vector<MatrixXd> Na_, Pe_;
    MatrixXd X_om_, X_dce_;
    std::vector<MatrixXd> X_af_;
    MatrixXd X_mix11_, X_mix22_, X_mix12_;
};

inline OperatorMatrix bare_hamiltonian(const ModelParams& p, const SpacePtr& space) {
    HamiltonianAssembler asmb(p);
    if (!space->same_structure(*asmb.space())) throw SpaceMismatch("space inconsistent with model params");
    return {space, asmb.bare(p).cast<cplx>()};
}

inline OperatorMatrix transformed_hamiltonian(const ModelParams& p, const SpacePtr& space, int series_order) {
    HamiltonianAssembler asmb(p);
    if (!space->same_structure(*asmb.space())) throw SpaceMismatch("space inconsistent with model params");
    return {space, asmb.transformed(p, series_order).cast<cplx>()};
}

// Sets the named swept parameter; used by spectrum sweeps and crossing search.
inline ModelParams with_axis(ModelParams p, const std::string& axis, double x) {
    if (axis == "omega_c") p.omega_c = x;
    else if (axis == "omega_c1") p.omega_c1 = x;
    else if (axis == "omega_c2") p.omega_c2 = x;
    else if (axis == "omega_a") p.omega_a = x;
    else if (axis == "omega_a1") p.omega_a1 = x;
    else if (axis == "omega_a2") p.omega_a2 = x;
    else if (axis == "omega_a_common") p.omega_a1 = p.omega_a2 = x;  // both atoms tuned together
    else if (axis == "g") p.g = x;
    else if (axis == "lambda") p.lambda = x;
    else if (axis == "lambda1") p.lambda1 = x;
    else if (axis == "lambda2") p.lambda2 = x;
    else throw ValidationError("unknown sweep axis '" + axis + "'");
    return p;
}

// ---------------------------------------------------------------- drives

struct DriveSpec {
    enum class Kind { CW, GaussianPulse } kind = Kind::CW;
    double A = 0.0;       // force amplitude; for pulses this is the envelope peak
    double omega_d = 1.0; // drive frequency
    double sigma = 0.0;   // pulse width (GaussianPulse only)
    double t0 = 0.0;      // pulse center (GaussianPulse only)

    void validate() const {
        if (A < 0.0) throw ValidationError("drive amplitude must be >= 0");
        if (!(omega_d > 0.0)) throw ValidationError("drive frequency must be > 0");
        if (kind == Kind::GaussianPulse && !(sigma > 0.0))
            throw ValidationError("pulse width must be > 0");
    }
};

inline DriveSpec cw_drive(double A, double omega_d = 1.0) {
    DriveSpec d;
    d.kind = DriveSpec::Kind::CW;
    d.A = A;
    d.omega_d = omega_d;
    return d;
}

// A pulse specified by its time-integrated envelope area S has peak
// A = S / (sigma sqrt(2 pi)); this helper performs that conversion.
inline DriveSpec gaussian_pulse_by_area(double area, double sigma, double t0, double omega_d = 1.0) {
    DriveSpec d;
    d.kind = DriveSpec::Kind::GaussianPulse;
    d.A = area / (sigma * std::sqrt(2.0 * M_PI));
    d.omega_d = omega_d;
    d.sigma = sigma;
    d.t0 = t0;
    return d;
}

inline DriveSpec gaussian_pulse_by_peak(double peak, double sigma, double t0, double omega_d = 1.0) {
    DriveSpec d;
    d.kind = DriveSpec::Kind::GaussianPulse;
    d.A = peak;
    d.omega_d = omega_d;
    d.sigma = sigma;
    d.t0 = t0;
    return d;
}

// F(t): CW gives A cos(w_d t); the pulse multiplies that by a unit-peak
// Gaussian envelope centered at t0.
inline double drive_amplitude(const DriveSpec& d, double t) {
    if (d.kind == DriveSpec::Kind::CW) return d.A * std::cos(d.omega_d * t);
    const double x = (t - d.t0) / d.sigma;
    return d.A * std::exp(-0.5 * x * x) * std::cos(d.omega_d * t);
}

// The drive couples to the bare mechanical quadrature b + b^dag.
inline OperatorMatrix drive_term(const SpacePtr& space, int mech_index = 0) {
    OperatorMatrix b = annihilator(space, mech_index);
    return b + adjoint(b);
}

// ---------------------------------------------------------------- circuit

struct CircuitParams {
    double g_m;      // qubit-mechanics coupling
    double g_c;      // qubit-cavity coupling
    double omega_q;  // qubit frequency
    double omega_c;  // cavity frequency
};

inline double charge_qubit_g(const CircuitParams& c) {
    const double det = c.omega_q - c.omega_c;
    if (std::abs(det) < 1e-12) throw DegenerateDetuning("qubit and cavity frequencies coincide");
    return 2.0 * c.g_m * c.g_c * c.g_c / (det * det);
}

struct LossRates {
    double kappa = 0.0;  // each cavity mode
    double gamma = 0.0;  // mechanical mode
    double eta = 0.0;    // each atom

    void validate() const {
        if (kappa < 0 || gamma < 0 || eta < 0) throw ValidationError("loss rates must be >= 0");
    }
};

}  // namespace vacmech

#endif
