#include <catch2/catch_amalgamated.hpp>

#include <vacmech/lindblad.hpp>

using namespace vacmech;
using Catch::Approx;

namespace {

std::vector<double> linear_grid(double t_end, int n) {
    std::vector<double> ts;
    for (int i = 0; i <= n; ++i) ts.push_back(t_end * i / n);
    return ts;
}

EvolveSpec machinery_spec() {
    EvolveSpec s;
    s.params = single_atom_single_mode(0.6, 0.4, 0.03, 0.01, 3, 3);
    s.losses = LossRates{1e-3, 1e-3, 1e-3};
    s.drive = gaussian_pulse_by_area(0.25 * M_PI, 20.0, 120.0);
    s.initial = initial_ground();
    s.t_grid = {0.0, 300.0, 600.0};
    return s;
}

}  // namespace

TEST_CASE("dressed lowering keeps only downward transitions", "[lindblad]") {
    auto p = single_atom_single_mode(0.6, 0.4, 0.03, 0.01, 3, 3);
    auto sp = make_space(p);
    auto sol = eigensolve(bare_hamiltonian(p, sp));
    auto a = annihilator(sp, 1);
    auto Od = dressed_lowering(sol, a);

    // in the eigenbasis the operator is strictly upper triangular
    const MatrixXcd M = sol.vectors.adjoint() * Od.matrix() * sol.vectors;
    for (int m = 0; m < sp->dim(); ++m)
        for (int n = 0; n <= m; ++n) CHECK(std::abs(M(m, n)) < 1e-12);
    // and it annihilates the dressed ground state
    CHECK((Od.matrix() * sol.vectors.col(0)).norm() < 1e-12);

    // decoupled model: the dressed annihilator is the bare annihilator
    auto p0 = single_atom_single_mode(0.617, 0.413, 0.0, 0.0, 3, 3);
    auto sp0 = make_space(p0);
    auto sol0 = eigensolve(bare_hamiltonian(p0, sp0));
    auto a0 = annihilator(sp0, 1);
    CHECK((dressed_lowering(sol0, a0).matrix() - a0.matrix()).cwiseAbs().maxCoeff() < 1e-12);

    // widening the degeneracy guard drops exactly the transitions below it
    auto pg = single_atom_single_mode(0.6, 0.4, 0.03, 0.01, 2, 2);
    auto spg = make_space(pg);
    auto solg = eigensolve(bare_hamiltonian(pg, spg));
    auto ag = annihilator(spg, 1);
    const MatrixXcd full = solg.vectors.adjoint() *
                           (ag.matrix() + ag.matrix().adjoint()) * solg.vectors;
    const MatrixXcd Mg =
        solg.vectors.adjoint() * dressed_lowering(solg, ag, 0.5).matrix() * solg.vectors;
    for (int m = 0; m < spg->dim(); ++m)
        for (int n = m + 1; n < spg->dim(); ++n) {
            if (solg.values(n) - solg.values(m) >= 0.5)
                CHECK(std::abs(Mg(m, n) - full(m, n)) < 1e-12);
            else
                CHECK(std::abs(Mg(m, n)) < 1e-14);
        }

    auto other = make_space(single_atom_single_mode(0.6, 0.4, 0.03, 0.01, 4, 4));
    CHECK_THROWS_AS(dressed_lowering(sol, annihilator(other, 1)), SpaceMismatch);
}

TEST_CASE("zero-drive evolution leaves the dressed ground stationary", "[lindblad]") {
    EvolveSpec s;
    s.params = single_atom_single_mode(0.6, 0.4, 0.03, 0.01, 4, 4);
    s.losses = LossRates{1e-3, 1e-3, 1e-3};
    s.initial = initial_ground();
    s.t_grid = linear_grid(200.0, 4);
    auto rec = evolve(s);

    auto sol = eigensolve(bare_hamiltonian(s.params, make_space(s.params)));
    const double e0 = sol.values(0);
    for (std::size_t i = 0; i < rec.times.size(); ++i) {
        CHECK(std::abs(rec.series("mean_photon")[i]) < 1e-10);
        CHECK(std::abs(rec.series("mean_phonon")[i]) < 1e-10);
        CHECK(std::abs(rec.series("mean_atom")[i]) < 1e-10);
        CHECK(std::abs(rec.series("energy")[i] - e0) < 1e-10);
        CHECK(rec.trace_deviation[i] < 1e-12);
    }
    CHECK(rec.max_hermiticity_residual < 1e-12);
    CHECK(rec.min_rho_eigenvalue > -1e-12);
    CHECK(rec.final_rho_digest.size() == 16);
}

TEST_CASE("pulsed run reproduces the frozen reference observables", "[lindblad]") {
    // reference values come from an independent full-dimension bare-basis
    // integration at tight tolerance, frozen into this table
    const double X300 = 0.01220735481830347, B300 = 0.11402992692941871, A300 = 0.01683835345118942;
    const double X600 = 0.047834359898482746, B600 = 0.044840046218404331, A600 = 0.050737666742001836;

    EvolveSpec s = machinery_spec();
    s.rtol = 1e-10;
    s.atol = 1e-12;
    auto rec = evolve(s);
    CHECK(rec.series("mean_atom")[1] == Approx(X300).margin(1e-7));
    CHECK(rec.series("mean_phonon")[1] == Approx(B300).margin(1e-7));
    CHECK(rec.series("mean_photon")[1] == Approx(A300).margin(1e-7));
    CHECK(rec.series("mean_atom")[2] == Approx(X600).margin(1e-7));
    CHECK(rec.series("mean_phonon")[2] == Approx(B600).margin(1e-7));
    CHECK(rec.series("mean_photon")[2] == Approx(A600).margin(1e-7));
    for (double d : rec.trace_deviation) CHECK(d < 1e-8);
    CHECK(rec.max_hermiticity_residual < 1e-10);
    CHECK(rec.min_rho_eigenvalue > -1e-8);

    EvolveSpec sd = machinery_spec();
    sd.rtol = 1e-11;
    sd.atol = 1e-13;
    auto ref = evolve_direct_reference(sd);
    CHECK(ref.series("mean_atom")[1] == Approx(X300).margin(1e-8));
    CHECK(ref.series("mean_phonon")[1] == Approx(B300).margin(1e-8));
    CHECK(ref.series("mean_photon")[1] == Approx(A300).margin(1e-8));
    CHECK(ref.series("mean_atom")[2] == Approx(X600).margin(1e-8));
    CHECK(ref.series("mean_phonon")[2] == Approx(B600).margin(1e-8));
    CHECK(ref.series("mean_photon")[2] == Approx(A600).margin(1e-8));

    // the two engines agree with each other as well
    for (const char* name : {"mean_atom", "mean_phonon", "mean_photon"})
        for (std::size_t i = 1; i < rec.times.size(); ++i)
            CHECK(rec.series(name)[i] == Approx(ref.series(name)[i]).margin(1e-7));
}

TEST_CASE("level cap reproduces the full-space observables", "[lindblad]") {
    EvolveSpec s = machinery_spec();
    s.rtol = 1e-9;
    s.atol = 1e-11;
    auto full = evolve(s);
    s.level_cap = 20;
    auto capped = evolve(s);
    for (const char* name : {"mean_atom", "mean_phonon", "mean_photon"})
        for (std::size_t i = 0; i < full.times.size(); ++i)
            CHECK(capped.series(name)[i] == Approx(full.series(name)[i]).margin(5e-6));
}

TEST_CASE("zero-loss superposition conserves energy on both state paths", "[lindblad]") {
    EvolveSpec s;
    s.params = single_atom_single_mode(0.6, 0.4, 0.03, 0.01, 3, 3);
    s.losses = LossRates{0.0, 0.0, 0.0};
    const double r = 1.0 / std::sqrt(2.0);
    s.initial = initial_superposition({{{0, 1, 0}, cplx(r)}, {{0, 0, 1}, cplx(r)}});
    s.t_grid = linear_grid(100.0, 10);
    s.rtol = 1e-10;
    s.atol = 1e-12;
    auto pure = evolve(s);

    const double e0 = pure.series("energy")[0];
    double pmin = 1e300, pmax = -1e300;
    for (std::size_t i = 0; i < pure.times.size(); ++i) {
        CHECK(std::abs(pure.series("energy")[i] - e0) < 1e-9);
        CHECK(pure.trace_deviation[i] < 1e-9);
        pmin = std::min(pmin, pure.series("mean_phonon")[i]);
        pmax = std::max(pmax, pure.series("mean_phonon")[i]);
    }
    // the bare components hybridize, so populations genuinely oscillate
    CHECK(pmax - pmin > 1e-3);

    // density-matrix initialization of the same state gives the same record
    VectorXcd psi = VectorXcd::Zero(32);
    auto sp = make_space(s.params);
    psi(sp->pack({0, 1, 0})) = r;
    psi(sp->pack({0, 0, 1})) = r;
    EvolveSpec sd = s;
    sd.initial = initial_density(psi * psi.adjoint());
    auto dens = evolve(sd);
    for (const char* name : {"mean_atom", "mean_phonon", "mean_photon", "energy"})
        for (std::size_t i = 0; i < pure.times.size(); ++i)
            CHECK(dens.series(name)[i] == Approx(pure.series(name)[i]).margin(1e-8));

    // and the bare-basis reference engine concurs
    auto ref = evolve_direct_reference(s);
    for (const char* name : {"mean_atom", "mean_phonon", "mean_photon"})
        for (std::size_t i = 0; i < pure.times.size(); ++i)
            CHECK(ref.series(name)[i] == Approx(pure.series(name)[i]).margin(1e-8));
}

TEST_CASE("a schedule split at an interior point equals the unsplit run", "[lindblad]") {
    EvolveSpec s;
    s.params = single_atom_single_mode(0.6, 0.4, 0.03, 0.01, 3, 3);
    s.losses = LossRates{1e-3, 1e-3, 1e-3};
    s.drive = cw_drive(0.005);
    s.initial = initial_ground();
    s.t_grid = linear_grid(100.0, 5);
    s.rtol = 1e-10;
    s.atol = 1e-12;
    auto plain = evolve(s);

    EvolveSpec s2 = s;
    s2.schedule = Schedule{"omega_a", {{0.0, 0.4}, {50.0, 0.4}}};
    auto split = evolve(s2);
    for (const char* name : {"mean_atom", "mean_phonon", "mean_photon", "energy"})
        for (std::size_t i = 0; i < plain.times.size(); ++i)
            CHECK(split.series(name)[i] == Approx(plain.series(name)[i]).margin(1e-8));
    for (double d : split.trace_deviation) CHECK(d < 1e-9);
}

TEST_CASE("evolve validates schedules, grids and initial states", "[lindblad]") {
    EvolveSpec s;
    s.params = single_atom_single_mode(0.6, 0.4, 0.03, 0.01, 2, 2);
    s.losses = LossRates{1e-3, 1e-3, 1e-3};
    s.t_grid = {0.0, 10.0};

    auto bad = s;
    bad.schedule = Schedule{"omega_a", {}};
    CHECK_THROWS_AS(evolve(bad), ValidationError);
    bad.schedule = Schedule{"omega_a", {{5.0, 0.4}}};
    CHECK_THROWS_AS(evolve(bad), ValidationError);
    bad.schedule = Schedule{"omega_a", {{0.0, 0.4}, {0.0, 0.5}}};
    CHECK_THROWS_AS(evolve(bad), ValidationError);
    bad.schedule = Schedule{"no_such_axis", {{0.0, 0.4}}};
    CHECK_THROWS_AS(evolve(bad), ValidationError);

    bad = s;
    bad.t_grid = {0.0};
    CHECK_THROWS_AS(evolve(bad), ValidationError);
    bad.t_grid = {0.0, 5.0, 5.0};
    CHECK_THROWS_AS(evolve(bad), ValidationError);
    bad.t_grid = {-1.0, 5.0};
    CHECK_THROWS_AS(evolve(bad), ValidationError);

    bad = s;
    bad.initial = initial_superposition({{{0, 1, 0}, cplx(1.0)}, {{0, 0, 1}, cplx(1.0)}});
    CHECK_THROWS_AS(evolve(bad), InvalidInitialState);  // norm sqrt(2)
    bad.initial = initial_superposition({{{0, 9, 0}, cplx(1.0)}});
    CHECK_THROWS_AS(evolve(bad), IndexOutOfRange);

    bad = s;
    bad.initial = initial_density(MatrixXcd::Identity(3, 3));
    CHECK_THROWS_AS(evolve(bad), InvalidInitialState);  // wrong shape
    MatrixXcd nh = MatrixXcd::Zero(18, 18);
    nh(0, 0) = 1.0;
    nh(0, 1) = 0.5;
    bad.initial = initial_density(nh);
    CHECK_THROWS_AS(evolve(bad), InvalidInitialState);  // not Hermitian
    bad.initial = initial_density(0.5 * MatrixXcd::Identity(18, 18));
    CHECK_THROWS_AS(evolve(bad), InvalidInitialState);  // trace 9

    auto sched = s;
    sched.schedule = Schedule{"omega_a", {{0.0, 0.4}, {5.0, 0.45}}};
    CHECK_THROWS_AS(evolve_direct_reference(sched), ValidationError);
}

TEST_CASE("trajectory spectrum finds injected lines", "[lindblad]") {
    TrajectoryRecord rec;
    const int N = 512;
    const double w1 = 2.0 * M_PI * 20.0 / 512.0, w2 = 2.0 * M_PI * 60.0 / 512.0;
    for (int i = 0; i < N; ++i) {
        const double t = static_cast<double>(i);
        rec.times.push_back(t);
        rec.observables["probe"].push_back(0.7 + std::cos(w1 * t) + 0.3 * std::cos(w2 * t));
    }

    auto spec = spectrum_of(rec, "probe", 0.0, 600.0);
    CHECK(spec.resolution == Approx(2.0 * M_PI / 512.0).epsilon(1e-14));
    auto dom = spec.dominant();
    CHECK(dom.frequency == Approx(w1).epsilon(1e-13));
    CHECK(dom.magnitude == Approx(256.0).margin(1e-6));  // N/2 per unit amplitude
    REQUIRE(spec.peaks.size() == 2);
    CHECK(spec.peaks[1].frequency == Approx(w2).epsilon(1e-13));
    CHECK(spec.peaks[1].magnitude == Approx(0.3 * 256.0).margin(1e-6));

    // windows: a half-length window still resolves the line on its new grid
    auto half = spectrum_of(rec, "probe", 256.0, 600.0);
    CHECK(half.dominant().frequency == Approx(w1).epsilon(1e-12));
    // Hann taper keeps the peak location
    auto tapered = spectrum_of(rec, "probe", 0.0, 600.0, true);
    CHECK(tapered.dominant().frequency == Approx(w1).epsilon(1e-12));

    CHECK_THROWS_AS(spectrum_of(rec, "probe", 0.0, 50.0), WindowTooShort);
    CHECK_THROWS_AS(spectrum_of(rec, "nope", 0.0, 600.0), MissingObservable);

    TrajectoryRecord jag = rec;
    jag.times[100] += 0.25;
    CHECK_THROWS_AS(spectrum_of(jag, "probe", 0.0, 600.0), NonuniformGrid);
}

TEST_CASE("joint excitation check compares atoms against the pair correlation", "[lindblad]") {
    TrajectoryRecord rec;
    for (int i = 0; i < 10; ++i) {
        const double v = 0.01 * i;
        rec.times.push_back(i);
        rec.observables["mean_atom_1"].push_back(v);
        rec.observables["mean_atom_2"].push_back(v * 1.001);
        rec.observables["two_atom_correlation"].push_back(v);
    }
    auto rep = joint_excitation_check(rec, 0.05);
    CHECK(rep.passed);
    CHECK(rep.max_excitation == Approx(0.09 * 1.001));
    CHECK(rep.max_dev_atom1 == 0.0);
    CHECK(rep.max_dev_atom2 == Approx(0.09 * 0.001).epsilon(1e-10));

    // an atom that rises without the joint correlation fails the check
    TrajectoryRecord solo = rec;
    solo.observables["two_atom_correlation"].assign(10, 0.0);
    CHECK_FALSE(joint_excitation_check(solo, 0.05).passed);
    // all-zero excitation cannot pass
    TrajectoryRecord flat;
    flat.times = {0.0, 1.0};
    flat.observables["mean_atom_1"] = {0.0, 0.0};
    flat.observables["mean_atom_2"] = {0.0, 0.0};
    flat.observables["two_atom_correlation"] = {0.0, 0.0};
    CHECK_FALSE(joint_excitation_check(flat, 0.05).passed);

    TrajectoryRecord missing;
    missing.times = {0.0, 1.0};
    missing.observables["mean_atom_1"] = {0.0, 0.0};
    CHECK_THROWS_AS(joint_excitation_check(missing, 0.05), MissingObservable);
}

TEST_CASE("conversion protocol wiring: schedule, metadata, preconditions", "[lindblad]") {
    // lossless miniature run; the full-scale protocol lives in the validation suite
    auto p = single_atom_two_modes(0.65, 0.5, 0.33784241, 0.02, 0.01, 2, 2, 2);
    ConversionOptions opt;
    opt.t_on = 10.0;
    opt.level_pair = {5, 6};
    auto rec = frequency_conversion_protocol(p, LossRates{0.0, 0.0, 0.0}, 0.18,
                                             linear_grid(40.0, 8), opt);
    REQUIRE(rec.meta.count("two_omega") == 1);
    CHECK(rec.meta.at("two_omega") > 0.0);
    CHECK(rec.meta.at("hold_duration") == Approx(M_PI / rec.meta.at("two_omega")));
    CHECK(rec.meta.at("resonance_window_start") == 10.0);
    // photon-pair component of the initial superposition: one unit in mode 2
    CHECK(rec.series("mean_photon_2")[0] == Approx(1.0).margin(0.1));

    // detuned frequencies violate the matching precondition
    auto off = single_atom_two_modes(0.65, 0.5, 0.20, 0.02, 0.01, 2, 2, 2);
    CHECK_THROWS_AS(frequency_conversion_protocol(off, LossRates{0, 0, 0}, 0.18, linear_grid(40.0, 8)),
                    ValidationError);
    CHECK_THROWS_AS(frequency_conversion_protocol(single_atom_single_mode(0.6, 0.4, 0.03, 0.01),
                                                  LossRates{0, 0, 0}, 0.18, linear_grid(40.0, 8)),
                    WrongModel);
}
