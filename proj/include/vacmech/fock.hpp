#ifndef VACMECH_FOCK_HPP
#define VACMECH_FOCK_HPP

#include <Eigen/Dense>
#include <complex>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "util.hpp"

namespace vacmech {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

// ---------------------------------------------------------------- space

struct ModeLadder {
    int cutoff;         // highest retained Fock level; dimension = cutoff + 1
    std::string label;
};

// Truncated tensor-product space. Subsystem order is fixed at construction:
// qubits first, then bosonic modes in list order.
class HilbertSpace {
public:
    HilbertSpace(std::vector<ModeLadder> modes, int qubit_count, long dim_ceiling = 20000)
        : modes_(std::move(modes)), qubit_count_(qubit_count) {
        if (qubit_count_ < 0) throw ValidationError("qubit_count must be >= 0");
        long d = 1;
        for (int q = 0; q < qubit_count_; ++q) {
            d *= 2;
            if (d > dim_ceiling) throw DimensionOverflow("dim exceeds ceiling " + std::to_string(dim_ceiling));
        }
        for (const auto& m : modes_) {
            if (m.cutoff < 1) throw InvalidCutoff("mode '" + m.label + "' cutoff " + std::to_string(m.cutoff) + " < 1");
            d *= m.cutoff + 1;
            if (d > dim_ceiling) throw DimensionOverflow("dim exceeds ceiling " + std::to_string(dim_ceiling));
        }
        dim_ = static_cast<int>(d);
        subsystem_dims_.assign(static_cast<std::size_t>(qubit_count_), 2);
        for (const auto& m : modes_) subsystem_dims_.push_back(m.cutoff + 1);
    }

    int dim() const { return dim_; }
    int qubit_count() const { return qubit_count_; }
    const std::vector<ModeLadder>& modes() const { return modes_; }
    const std::vector<int>& subsystem_dims() const { return subsystem_dims_; }

    // Same structure (not same object) is enough for operator algebra.
    bool same_structure(const HilbertSpace& o) const {
        if (dim_ != o.dim_ || qubit_count_ != o.qubit_count_ || modes_.size() != o.modes_.size()) return false;
        for (std::size_t i = 0; i < modes_.size(); ++i)
            if (modes_[i].cutoff != o.modes_[i].cutoff) return false;
        return true;
    }

    // basis index -> per-subsystem occupation (qubits first, then modes)
    std::vector<int> unpack(int idx) const {
        if (idx < 0 || idx >= dim_) throw IndexOutOfRange("basis index " + std::to_string(idx));
        std::vector<int> occ(subsystem_dims_.size());
        for (std::size_t s = subsystem_dims_.size(); s-- > 0;) {
            occ[s] = idx % subsystem_dims_[s];
            idx /= subsystem_dims_[s];
        }
        return occ;
    }

    int pack(const std::vector<int>& occ) const {
        if (occ.size() != subsystem_dims_.size()) throw IndexOutOfRange("occupation list length mismatch");
        int idx = 0;
        for (std::size_t s = 0; s < occ.size(); ++s) {
            if (occ[s] < 0 || occ[s] >= subsystem_dims_[s]) throw IndexOutOfRange("occupation out of range");
            idx = idx * subsystem_dims_[s] + occ[s];
        }
        return idx;
    }

    // Human-readable basis label, qubits as g/e letters: |g,1,0> style.
    std::string basis_label(int idx) const {
        auto occ = unpack(idx);
        std::string s = "|";
        for (std::size_t i = 0; i < occ.size(); ++i) {
            if (i) s += ",";
            if (static_cast<int>(i) < qubit_count_)
                s += occ[i] == 0 ? 'g' : 'e';
            else
                s += std::to_string(occ[i]);
        }
        s += ">";
        return s;
    }

private:
    std::vector<ModeLadder> modes_;
    int qubit_count_;
    int dim_ = 0;
    std::vector<int> subsystem_dims_;
};

using SpacePtr = std::shared_ptr<const HilbertSpace>;

inline SpacePtr build_space(std::vector<ModeLadder> modes, int qubit_count, long dim_ceiling = 20000) {
    return std::make_shared<const HilbertSpace>(std::move(modes), qubit_count, dim_ceiling);
}

// ---------------------------------------------------------------- operators

class OperatorMatrix {
public:
    OperatorMatrix() = default;
    OperatorMatrix(SpacePtr space, MatrixXcd m) : space_(std::move(space)), m_(std::move(m)) {
        if (m_.rows() != space_->dim() || m_.cols() != space_->dim())
            throw SpaceMismatch("matrix shape does not match space dim");
    }

    const SpacePtr& space() const { return space_; }
    const MatrixXcd& matrix() const { return m_; }
    MatrixXcd& matrix() { return m_; }
    int dim() const { return space_->dim(); }

    void require_same_space(const OperatorMatrix& o) const {
        if (!space_ || !o.space_ || !space_->same_structure(*o.space_))
            throw SpaceMismatch("operators act on different spaces");
    }

    OperatorMatrix operator+(const OperatorMatrix& o) const {
        require_same_space(o);
        return {space_, m_ + o.m_};
    }
    OperatorMatrix operator-(const OperatorMatrix& o) const {
        require_same_space(o);
        return {space_, m_ - o.m_};
    }
    OperatorMatrix operator*(const OperatorMatrix& o) const {
        require_same_space(o);
        return {space_, m_ * o.m_};
    }
    friend OperatorMatrix operator*(double s, const OperatorMatrix& o) { return {o.space_, s * o.m_}; }
    friend OperatorMatrix operator*(cplx s, const OperatorMatrix& o) { return {o.space_, s * o.m_}; }
    OperatorMatrix& operator+=(const OperatorMatrix& o) {
        require_same_space(o);
        m_ += o.m_;
        return *this;
    }

    bool is_hermitian(double tol = 1e-12) const { return (m_ - m_.adjoint()).cwiseAbs().maxCoeff() < tol; }

private:
    SpacePtr space_;
    MatrixXcd m_;
};

namespace detail {

// kron factor placement: returns the full-space matrix with `local` acting on
// subsystem `which` (flat index over qubits-then-modes) and identity elsewhere.
inline MatrixXcd embed_local(const HilbertSpace& sp, int which, const MatrixXcd& local) {
    const auto& dims = sp.subsystem_dims();
    int left = 1, right = 1;
    for (int s = 0; s < which; ++s) left *= dims[s];
    for (std::size_t s = which + 1; s < dims.size(); ++s) right *= dims[s];
    const int d = dims[which];
    MatrixXcd out = MatrixXcd::Zero(sp.dim(), sp.dim());
    for (int l = 0; l < left; ++l)
        for (int r = 0; r < right; ++r)
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) {
                    if (local(i, j) == cplx(0.0)) continue;
                    const int row = (l * d + i) * right + r;
                    const int col = (l * d + j) * right + r;
                    out(row, col) = local(i, j);
                }
    return out;
}

inline MatrixXcd destroy_local(int dim) {
    MatrixXcd a = MatrixXcd::Zero(dim, dim);
    for (int k = 1; k < dim; ++k) a(k - 1, k) = std::sqrt(static_cast<double>(k));
    return a;
}

}  // namespace detail

inline OperatorMatrix annihilator(const SpacePtr& space, int mode_index) {
    if (mode_index < 0 || mode_index >= static_cast<int>(space->modes().size()))
        throw IndexOutOfRange("mode_index " + std::to_string(mode_index));
    const int which = space->qubit_count() + mode_index;
    const int d = space->subsystem_dims()[which];
    return {space, detail::embed_local(*space, which, detail::destroy_local(d))};
}

// sigma_minus = |g><e|, qubit basis order (g, e)
inline OperatorMatrix qubit_lowering(const SpacePtr& space, int qubit_index) {
    if (qubit_index < 0 || qubit_index >= space->qubit_count())
        throw IndexOutOfRange("qubit_index " + std::to_string(qubit_index));
    MatrixXcd sm = MatrixXcd::Zero(2, 2);
    sm(0, 1) = 1.0;
    return {space, detail::embed_local(*space, qubit_index, sm)};
}

inline OperatorMatrix number_operator(const SpacePtr& space, int mode_index) {
    if (mode_index < 0 || mode_index >= static_cast<int>(space->modes().size()))
        throw IndexOutOfRange("mode_index " + std::to_string(mode_index));
    const int which = space->qubit_count() + mode_index;
    const int d = space->subsystem_dims()[which];
    MatrixXcd n = MatrixXcd::Zero(d, d);
    for (int k = 0; k < d; ++k) n(k, k) = static_cast<double>(k);
    return {space, detail::embed_local(*space, which, n)};
}

inline OperatorMatrix identity(const SpacePtr& space) {
    return {space, MatrixXcd::Identity(space->dim(), space->dim())};
}

inline OperatorMatrix adjoint(const OperatorMatrix& op) { return {op.space(), op.matrix().adjoint()}; }

// Expectation on a pure state (vector) or density matrix.
inline cplx expectation(const OperatorMatrix& op, const VectorXcd& state) {
    if (state.size() != op.dim()) throw SpaceMismatch("state length does not match operator space");
    return state.dot(op.matrix() * state);  // Eigen dot conjugates the left argument
}

inline cplx expectation(const OperatorMatrix& op, const MatrixXcd& density) {
    if (density.rows() != op.dim() || density.cols() != op.dim())
        throw SpaceMismatch("density shape does not match operator space");
    if ((density - density.adjoint()).cwiseAbs().maxCoeff() > 1e-8)
        throw InvalidInitialState("density matrix is not Hermitian");
    if (std::abs(density.trace() - cplx(1.0)) > 1e-8)
        throw InvalidInitialState("density matrix trace differs from 1");
    return (op.matrix() * density).trace();
}

}  // namespace vacmech

#endif
