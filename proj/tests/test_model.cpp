#include <catch2/catch_amalgamated.hpp>

#include <vacmech/model.hpp>

using namespace vacmech;
using Catch::Approx;

namespace {
Eigen::VectorXd lowest_eigs(const OperatorMatrix& h, int n) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h.matrix());
    return es.eigenvalues().head(n);
}
}  // namespace

TEST_CASE("every Hamiltonian is Hermitian and real in this basis", "[model]") {
    const ModelParams ps[] = {
        single_atom_single_mode(0.6, 0.4, 0.03, 0.01),
        single_atom_two_modes(0.65, 0.5, 0.34, 0.02, 0.01),
        two_atoms_single_mode(0.7, 0.45, 0.55, 0.01, 0.014, 0.022),
    };
    for (const auto& p : ps) {
        auto sp = make_space(p);
        auto h = bare_hamiltonian(p, sp);
        CHECK(h.is_hermitian(1e-12));
        CHECK(h.matrix().imag().cwiseAbs().maxCoeff() == 0.0);
        auto ht = transformed_hamiltonian(p, sp, 3);
        CHECK(ht.is_hermitian(1e-12));
    }
}

TEST_CASE("model spaces follow the qubits-mech-cavities layout", "[model]") {
    auto p2 = single_atom_two_modes(0.65, 0.5, 0.34, 0.02, 0.01);
    auto sp2 = make_space(p2);
    REQUIRE(sp2->subsystem_dims() == std::vector<int>{2, 7, 6, 6});
    CHECK(sp2->modes()[0].label == "mech");
    CHECK(sp2->modes()[1].label == "cavity1");

    auto p3 = two_atoms_single_mode(0.7, 0.45, 0.55, 0.01, 0.014, 0.022);
    auto sp3 = make_space(p3);
    REQUIRE(sp3->subsystem_dims() == std::vector<int>{2, 2, 7, 7});

    auto bad = single_atom_single_mode(0.6, 0.4, 0.03, 0.01, 0, 6);
    CHECK_THROWS_AS(make_space(bad), InvalidCutoff);
    auto neg = single_atom_single_mode(-0.6, 0.4, 0.03, 0.01);
    CHECK_THROWS_AS(make_space(neg), ValidationError);
}

// Polaron-frame diagonal: the photon pair |g,0,2> sits at 2 omega_c minus the
// Kerr shift (g^2/w_m) n^2, i.e. -4 g^2 at n = 2.
TEST_CASE("transformed frame reproduces the Kerr-shifted pair energy", "[model]") {
    auto p = single_atom_single_mode(0.485, 0.4, 0.03, 0.005);
    auto sp = make_space(p);
    auto ht = transformed_hamiltonian(p, sp, 3);
    const int i = sp->pack({0, 0, 2});
    const double shift = ht.matrix()(i, i).real() - 2.0 * 0.485;
    CHECK(shift == Approx(-0.0035999999999998256).margin(1e-12));
    CHECK(shift == Approx(-4.0 * 0.03 * 0.03).margin(1e-10));
}

TEST_CASE("high-order transformed spectrum converges to the bare spectrum", "[model]") {
    auto p = single_atom_single_mode(0.6, 0.4, 0.03, 0.005, 10, 10);
    auto sp = make_space(p);
    auto eb = lowest_eigs(bare_hamiltonian(p, sp), 10);
    auto et = lowest_eigs(transformed_hamiltonian(p, sp, 6), 10);
    CHECK((eb - et).cwiseAbs().maxCoeff() < 5e-12);

    auto sp2 = make_space(p);
    CHECK_THROWS_AS(transformed_hamiltonian(p, sp2, -1), InvalidOrder);
}

TEST_CASE("two-mode transformed frame carries the intermode scattering element", "[model]") {
    auto p = single_atom_two_modes(0.65, 0.5, 0.33784241, 0.02, 0.01);
    auto sp = make_space(p);
    auto ht = transformed_hamiltonian(p, sp, 3);
    const int i_in = sp->pack({0, 0, 0, 2});
    const int i_out = sp->pack({0, 0, 2, 0});
    const double el = ht.matrix()(i_out, i_in).real();
    CHECK(el == Approx(-0.00061538461538461551).margin(1e-15));
    const double c2 = 0.5 / 0.65;
    CHECK(el == Approx(-2.0 * 0.02 * 0.02 * c2).margin(1e-15));
}

TEST_CASE("hybridized-mode rewrite equals the direct two-mode Hamiltonian", "[model]") {
    auto p = single_atom_two_modes(0.65, 0.5, 0.33784241, 0.02, 0.01);
    HamiltonianAssembler asmb(p);
    const MatrixXd diff = asmb.two_mode_hybrid_form(p) - asmb.bare(p);
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-12);

    auto hy = hybridize(p);
    CHECK(hy.c == Approx(std::sqrt(0.5 / 0.65)));
    CHECK(hy.G == Approx((1.0 + 0.5 / 0.65) * 0.02));
    CHECK(hy.omega_tilde_c1 + hy.omega_tilde_c2 == Approx(0.65 + 0.5));
    CHECK_THROWS_AS(hybridize(single_atom_single_mode(0.6, 0.4, 0.03, 0.01)), WrongModel);
}

// With lambda2 = 0 and the second atom far detuned, the two-atom model's low
// spectrum must coincide with the one-atom model's.
TEST_CASE("decoupled second atom reduces to the single-atom spectrum", "[model]") {
    auto p3 = two_atoms_single_mode(0.6, 0.4, 2.5, 0.03, 0.005, 0.0);
    auto p1 = single_atom_single_mode(0.6, 0.4, 0.03, 0.005);
    auto e3 = lowest_eigs(bare_hamiltonian(p3, make_space(p3)), 5);
    auto e1 = lowest_eigs(bare_hamiltonian(p1, make_space(p1)), 5);
    CHECK((e3 - e1).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(e1(0) == Approx(-0.00023035612774177509).margin(1e-13));
    CHECK(e1(4) == Approx(0.99879437270452509).margin(1e-12));
}

TEST_CASE("assembler rejects parameters from another family", "[model]") {
    auto p = single_atom_single_mode(0.6, 0.4, 0.03, 0.01);
    HamiltonianAssembler asmb(p);
    auto other_cuts = single_atom_single_mode(0.6, 0.4, 0.03, 0.01, 5, 5);
    CHECK_THROWS_AS(asmb.bare(other_cuts), SpaceMismatch);
    auto other_kind = two_atoms_single_mode(0.6, 0.4, 0.5, 0.03, 0.01, 0.01);
    CHECK_THROWS_AS(asmb.bare(other_kind), SpaceMismatch);
    // same family, different couplings: allowed, that is the point of caching
    auto shifted = single_atom_single_mode(0.61, 0.4, 0.04, 0.01);
    CHECK_NOTHROW(asmb.bare(shifted));
}

TEST_CASE("with_axis sets exactly the named parameter", "[model]") {
    auto p = two_atoms_single_mode(0.7, 0.45, 0.55, 0.01, 0.014, 0.022);
    CHECK(with_axis(p, "omega_a2", 0.553).omega_a2 == 0.553);
    CHECK(with_axis(p, "omega_a2", 0.553).omega_a1 == 0.45);
    auto both = with_axis(p, "omega_a_common", 0.5);
    CHECK(both.omega_a1 == 0.5);
    CHECK(both.omega_a2 == 0.5);
    CHECK(with_axis(p, "g", 0.02).g == 0.02);
    CHECK_THROWS_AS(with_axis(p, "omega_x", 1.0), ValidationError);

    auto p1 = single_atom_single_mode(0.6, 0.4, 0.03, 0.01);
    CHECK(with_axis(p1, "omega_c", 0.59).omega_c == 0.59);
    CHECK(with_axis(p1, "lambda", 0.02).lambda == 0.02);
}

TEST_CASE("drive amplitude conventions", "[model]") {
    auto cwd = cw_drive(0.1, 1.0);
    CHECK(drive_amplitude(cwd, 0.0) == Approx(0.1));
    CHECK(drive_amplitude(cwd, M_PI) == Approx(-0.1));

    // area-specified pulse: peak = area / (sigma sqrt(2 pi))
    auto pa = gaussian_pulse_by_area(0.25 * M_PI, 20.0, 120.0);
    CHECK(pa.A == Approx(0.25 * M_PI / (20.0 * std::sqrt(2.0 * M_PI))).epsilon(1e-15));
    auto pp = gaussian_pulse_by_peak(pa.A, 20.0, 120.0);
    CHECK(drive_amplitude(pa, 37.5) == Approx(drive_amplitude(pp, 37.5)).epsilon(1e-15));
    // envelope at center over carrier, one sigma out drops by exp(-1/2)
    CHECK(drive_amplitude(pa, 120.0) == Approx(pa.A * std::cos(120.0)).epsilon(1e-13));
    CHECK(drive_amplitude(pa, 140.0) == Approx(pa.A * std::exp(-0.5) * std::cos(140.0)).epsilon(1e-13));

    auto bad = cw_drive(-1.0);
    CHECK_THROWS_AS(bad.validate(), ValidationError);
    DriveSpec widthless;
    widthless.kind = DriveSpec::Kind::GaussianPulse;
    widthless.A = 0.1;
    CHECK_THROWS_AS(widthless.validate(), ValidationError);

    auto sp = make_space(single_atom_single_mode(0.6, 0.4, 0.03, 0.01, 3, 3));
    auto vd = drive_term(sp);
    CHECK(vd.is_hermitian());
    CHECK(vd.matrix()(sp->pack({0, 0, 0}), sp->pack({0, 1, 0})).real() == Approx(1.0));
}

TEST_CASE("mediated qubit coupling from circuit parameters", "[model]") {
    CircuitParams c{0.1, 0.2, 5.0, 4.0};
    CHECK(charge_qubit_g(c) == Approx(2.0 * 0.1 * 0.2 * 0.2 / 1.0).epsilon(1e-15));
    CircuitParams deg{0.1, 0.2, 4.0, 4.0};
    CHECK_THROWS_AS(charge_qubit_g(deg), DegenerateDetuning);
}
