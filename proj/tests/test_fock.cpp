#include <catch2/catch_amalgamated.hpp>

#include <vacmech/fock.hpp>

using namespace vacmech;
using Catch::Approx;

TEST_CASE("space construction and validation", "[fock]") {
    auto sp = build_space({{6, "mech"}, {5, "cav"}}, 1);
    CHECK(sp->dim() == 2 * 7 * 6);
    CHECK(sp->qubit_count() == 1);
    REQUIRE(sp->subsystem_dims() == std::vector<int>{2, 7, 6});
    CHECK(sp->modes()[0].label == "mech");

    CHECK_THROWS_AS(build_space({{0, "m"}}, 0), InvalidCutoff);
    CHECK_THROWS_AS(build_space({{-3, "m"}}, 0), InvalidCutoff);
    CHECK_THROWS_AS(build_space({{100, "a"}, {100, "b"}}, 1), DimensionOverflow);
    CHECK_THROWS_AS(build_space({{3, "m"}}, -1), ValidationError);

    auto sp2 = build_space({{6, "other"}, {5, "names"}}, 1);
    CHECK(sp->same_structure(*sp2));            // labels do not matter
    auto sp3 = build_space({{5, "mech"}, {6, "cav"}}, 1);
    CHECK_FALSE(sp->same_structure(*sp3));      // cutoff order does
}

TEST_CASE("pack and unpack are inverse and ordered qubits-first", "[fock]") {
    auto sp = build_space({{3, "mech"}, {2, "cav"}}, 1);
    for (int i = 0; i < sp->dim(); ++i) {
        auto occ = sp->unpack(i);
        REQUIRE(occ.size() == 3);
        CHECK(sp->pack(occ) == i);
    }
    // the last subsystem varies fastest
    CHECK(sp->pack({0, 0, 0}) == 0);
    CHECK(sp->pack({0, 0, 1}) == 1);
    CHECK(sp->pack({0, 1, 0}) == 3);
    CHECK(sp->pack({1, 0, 0}) == 4 * 3);

    CHECK(sp->basis_label(0) == "|g,0,0>");
    CHECK(sp->basis_label(sp->pack({1, 2, 1})) == "|e,2,1>");

    CHECK_THROWS_AS(sp->unpack(-1), IndexOutOfRange);
    CHECK_THROWS_AS(sp->unpack(sp->dim()), IndexOutOfRange);
    CHECK_THROWS_AS(sp->pack({0, 0}), IndexOutOfRange);
    CHECK_THROWS_AS(sp->pack({0, 4, 0}), IndexOutOfRange);
}

TEST_CASE("ladder operators obey the truncated oscillator algebra", "[fock]") {
    auto sp = build_space({{5, "mech"}, {4, "cav"}}, 0);
    auto b = annihilator(sp, 0);
    auto n = number_operator(sp, 0);

    // a|k> = sqrt(k)|k-1> within each tensor sector
    for (int k = 1; k <= 5; ++k) {
        int col = sp->pack({k, 2});
        int row = sp->pack({k - 1, 2});
        CHECK(b.matrix()(row, col).real() == Approx(std::sqrt(double(k))));
    }
    // number operator equals a^dag a exactly
    CHECK(((adjoint(b) * b).matrix() - n.matrix()).cwiseAbs().maxCoeff() < 1e-14);

    // [a, a^dag] = 1 except on the top rung, where truncation leaves -cutoff
    MatrixXcd comm = (b * adjoint(b) - adjoint(b) * b).matrix();
    for (int i = 0; i < sp->dim(); ++i) {
        auto occ = sp->unpack(i);
        double expect = occ[0] == 5 ? -5.0 : 1.0;
        CHECK(comm(i, i).real() == Approx(expect));
    }

    // operators on different modes commute
    auto a = annihilator(sp, 1);
    CHECK(((b * a) - (a * b)).matrix().cwiseAbs().maxCoeff() < 1e-14);

    CHECK_THROWS_AS(annihilator(sp, 2), IndexOutOfRange);
    CHECK_THROWS_AS(number_operator(sp, -1), IndexOutOfRange);
}

TEST_CASE("qubit lowering connects e to g and annihilates g", "[fock]") {
    auto sp = build_space({{2, "mech"}}, 2);
    auto s0 = qubit_lowering(sp, 0);
    auto s1 = qubit_lowering(sp, 1);

    VectorXcd v = VectorXcd::Zero(sp->dim());
    v(sp->pack({1, 0, 2})) = 1.0;   // |e,g,2>
    VectorXcd w = s0.matrix() * v;
    CHECK(std::abs(w(sp->pack({0, 0, 2})) - cplx(1.0)) < 1e-15);
    CHECK((s0.matrix() * w).norm() < 1e-15);

    // (s^dag s) projects onto the excited state of its own qubit only
    auto p1 = adjoint(s1) * s1;
    CHECK(std::abs(expectation(p1, v)) < 1e-15);
    CHECK_THROWS_AS(qubit_lowering(sp, 2), IndexOutOfRange);
}

TEST_CASE("operator arithmetic enforces space agreement", "[fock]") {
    auto sp = build_space({{3, "m"}}, 0);
    auto other = build_space({{4, "m"}}, 0);
    auto b = annihilator(sp, 0);
    auto c = annihilator(other, 0);
    CHECK_THROWS_AS(b + c, SpaceMismatch);
    CHECK_THROWS_AS(b * c, SpaceMismatch);
    CHECK_THROWS_AS(OperatorMatrix(sp, MatrixXcd::Zero(3, 3)), SpaceMismatch);

    auto h = b + adjoint(b);
    CHECK(h.is_hermitian());
    CHECK_FALSE(b.is_hermitian());
    auto scaled = 2.0 * b;
    CHECK(scaled.matrix()(0, 1).real() == Approx(2.0));
    scaled += b;
    CHECK(scaled.matrix()(0, 1).real() == Approx(3.0));
}

TEST_CASE("expectation values on vectors and density matrices", "[fock]") {
    auto sp = build_space({{4, "m"}}, 0);
    auto n = number_operator(sp, 0);

    VectorXcd v = VectorXcd::Zero(sp->dim());
    v(3) = 1.0;
    CHECK(expectation(n, v).real() == Approx(3.0));

    // superposition (|1> + |2>)/sqrt2 has <n> = 1.5
    VectorXcd u = VectorXcd::Zero(sp->dim());
    u(1) = u(2) = 1.0 / std::sqrt(2.0);
    CHECK(expectation(n, u).real() == Approx(1.5));

    MatrixXcd rho = 0.5 * (v * v.adjoint()) + 0.5 * (u * u.adjoint());
    CHECK(expectation(n, rho).real() == Approx(2.25));

    VectorXcd bad = VectorXcd::Zero(2);
    CHECK_THROWS_AS(expectation(n, bad), SpaceMismatch);
    MatrixXcd nh = MatrixXcd::Zero(sp->dim(), sp->dim());
    nh(0, 1) = 1.0;  // not Hermitian
    nh(0, 0) = 1.0;
    CHECK_THROWS_AS(expectation(n, nh), InvalidInitialState);
    MatrixXcd untraced = 0.5 * MatrixXcd::Identity(sp->dim(), sp->dim());
    CHECK_THROWS_AS(expectation(n, untraced), InvalidInitialState);
}
