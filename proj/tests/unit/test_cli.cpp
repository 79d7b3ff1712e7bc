#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rydlock/adler.hpp"
#include "rydlock/calibration.hpp"
#include "rydlock/commands.hpp"
#include "rydlock/config.hpp"
#include "rydlock/csv_io.hpp"
#include "rydlock/errors.hpp"
#include "rydlock/units.hpp"
#include "rydlock/work_pool.hpp"

using namespace rydlock;
namespace fs = std::filesystem;

namespace {

const char* kReference = R"(schema = 1
[model]
variant = supplementary
gamma_khz = 25.4
omega_gamma = 0.5
delta_r_gamma = 4
delta_s_gamma = 1
chi_gamma = 32
[integration]
t_end_ms = 16
[drive]
omega_rs_gamma = 1
offset_khz = 0.5
[calibration]
preset = reference
[sweep]
field_mv_cm = 1, 2, 3, 4
f_inj_khz = 45, 46, 47
offsets_khz = 0.5, 1, 1.5, 2
omega_rs_lo_gamma = 0.1
omega_rs_hi_gamma = 3
)";

std::string message_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("rydlock_unit_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("config parses into SI units") {
    const RunConfig cfg = parse_config(kReference);
    const double g = units::khz_to_rad(25.4);
    CHECK(cfg.model.gamma == doctest::Approx(g));
    CHECK(cfg.model.chi == doctest::Approx(32 * g));
    CHECK(cfg.variant == EquationVariant::Supplementary);
    CHECK(cfg.drive_omega_rs == doctest::Approx(g));
    REQUIRE(cfg.offset_hz);
    CHECK(*cfg.offset_hz == doctest::Approx(500.0));
    REQUIRE(cfg.fields.size() == 4);
    CHECK(cfg.fields[1] == doctest::Approx(0.2));  // 2 mV/cm in V/m
    CHECK(cfg.injection_axis.back() == doctest::Approx(47e3));
    CHECK(cfg.offsets[0] == doctest::Approx(units::hz_to_rad(500.0)));
    REQUIRE(cfg.calibration);
    CHECK(calibration::induced_dipole(*cfg.calibration) == doctest::Approx(4.96e-28).epsilon(1e-12));
}

TEST_CASE("defaults") {
    const RunConfig cfg = parse_config("schema = 1\n");
    CHECK(cfg.variant == EquationVariant::Methods);
    CHECK(cfg.suppression == 0.1);
    CHECK(cfg.integration.rel_tol == 1e-8);
    CHECK(cfg.integration.abs_tol == 1e-10);
}

TEST_CASE("config rejections name the problem") {
    CHECK(message_of("[model]\ngamma_khz = 1\n").find("schema") != std::string::npos);
    CHECK(message_of("schema = 2\n").find("schema") != std::string::npos);
    const std::string bad_key = message_of("schema = 1\n[model]\ngamma_khz = 25.4\nchii_gamma = 3\n");
    CHECK(bad_key.find("chii_gamma") != std::string::npos);
    CHECK(bad_key.find("line 4") != std::string::npos);
    CHECK(message_of("schema = 1\n[plots]\n").find("plots") != std::string::npos);
    CHECK(message_of("schema = 1\n[drive]\nt_on_ms = 1\nt_on_ms = 2\n").find("duplicate") != std::string::npos);
    CHECK(message_of("schema = 1\n[drive]\nfield_mv_cm = 4\n").find("calibration") != std::string::npos);
    CHECK(message_of("schema = 1\n[drive]\noffset_khz = 1\nf_inj_khz = 40\n").find("not both") !=
          std::string::npos);
    CHECK(message_of("schema = 1\n[sweep]\nfield_mv_cm =\n").find("field_mv_cm") != std::string::npos);
    CHECK(message_of("schema = 1\n[sweep]\nfield_mv_cm = 3, 2\n").find("increasing") != std::string::npos);
    CHECK(message_of("schema = 1\n[model]\ngamma_khz = abc\n").find("gamma_khz") != std::string::npos);
    CHECK(message_of("schema = 1\n[model]\nomega_gamma = 1\n").find("gamma_khz") != std::string::npos);
    CHECK(message_of("schema = 1\n[model]\ngamma_khz = 25.4\nvariant = lindblad\n").find("variant") != std::string::npos);
    CHECK(message_of("schema = 1\n[drive]\nprotocol = step_on\nt_on_ms = 50\n").find("t_on") !=
          std::string::npos);
}

TEST_CASE("axes") {
    const auto a = parse_axis("1:2:5");
    REQUIRE(a.size() == 5);
    CHECK(a[1] == doctest::Approx(1.25));
    CHECK(parse_axis("3, 4.5,6") == std::vector<double>{3, 4.5, 6});
    CHECK_THROWS_AS(parse_axis(""), ConfigError);
    CHECK_THROWS_AS(parse_axis("1:2"), ConfigError);
    CHECK_THROWS_AS(parse_axis("1:2:0"), ConfigError);
}

TEST_CASE("canonical form is stable and complete") {
    const RunConfig a = parse_config(kReference);
    const RunConfig b = parse_config(std::string("# comment\n") + kReference);
    CHECK(a.canonical() == b.canonical());
    CHECK(a.canonical().find("model.chi") != std::string::npos);
    const RunConfig c = parse_config(std::string(kReference) + "[analysis]\nsuppression = 0.2\n");
    CHECK(a.canonical() != c.canonical());
}

TEST_CASE("matrix and table round trip") {
    io::Matrix m;
    m.corner = "field\\freq";
    m.rows = {1, 2};
    m.cols = {10, 20, 30};
    m.values = {{1, 2, 3}, {4, 5, 6.5}};
    m.metadata = {{"a", "b"}};
    std::stringstream ss;
    io::write_matrix(ss, m);
    const io::Matrix back = io::read_matrix(ss);
    CHECK(back.rows == m.rows);
    CHECK(back.cols == m.cols);
    CHECK(back.values == m.values);

    std::stringstream t;
    io::write_table(t, {"x", "y"}, {{"1", "2"}, {"3", "4"}}, {{"k", "v"}});
    const io::Table tab = io::read_table(t);
    CHECK(tab.rows.size() == 2);
    CHECK(tab.rows[1][tab.column("y")] == 4.0);
    CHECK_THROWS_AS(tab.column("z"), ConfigError);

    std::stringstream ragged("x,y\n1,2\n3\n");
    CHECK_THROWS_AS(io::read_table(ragged), ConfigError);
}

TEST_CASE("parallel_for reports the lowest failing index") {
    std::vector<int> out(100, 0);
    parallel_for(out.size(), 4, [&](std::size_t i) { out[i] = static_cast<int>(i); });
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == static_cast<int>(i));
    try {
        parallel_for(50, 4, [](std::size_t i) {
            if (i == 7 || i == 31) throw AnalysisError("cell " + std::to_string(i));
        });
        FAIL("expected rethrow");
    } catch (const AnalysisError& e) {
        CHECK(std::string(e.what()) == "cell 7");
    }
}

TEST_CASE("field sweep with an Adler generator in place of the simulator") {
    RunConfig cfg = parse_config(kReference);
    locking::OscReference osc;
    osc.params = cfg.model;
    osc.f_osc = 45e3;
    osc.a0 = 1.0;
    osc.settings = cfg.probe_settings();

    const double k = 0.014, d = units::hz_to_rad(1000.0);
    cfg.offset_hz = 1000.0;
    const auto& m = *cfg.calibration;
    const double d_ind = calibration::induced_dipole(m);
    const double e_c = calibration::field_from_rabi(d / k, d_ind, m.alpha);
    cfg.fields.clear();
    for (int i = 0; i <= 200; ++i) cfg.fields.push_back(e_c * (0.5 + 0.005 * i));

    // Narrow Gaussian line at the Adler readout on a 10 Hz grid.
    const cli::CellEvaluator gen = [&](std::size_t, double omega_rs, double delta) {
        const adler::AdlerParams p{-2.0 * delta, k, omega_rs};
        const double f = osc.f_osc + units::rad_to_hz(delta) + units::rad_to_hz(adler::pulled_frequency(p));
        cli::CellResult r;
        Spectrum& s = r.spectrum;
        s.record_length = 0.1;
        s.sample_rate = 2e5;
        s.window = Window::Hann;
        for (int j = 0; j <= 10000; ++j) {
            const double fj = 10.0 * j;
            s.freqs.push_back(fj);
            s.amplitude.push_back(std::exp(-0.5 * std::pow((fj - f) / 10.0, 2)));
            s.asd.push_back(0.0);
        }
        r.report = locking::read_lock(osc, s, delta);
        return r;
    };
    const cli::ColormapResult res = cli::sweep_field(cfg, osc, 4, gen);
    REQUIRE(res.first_locked);
    const double first = cfg.fields[*res.first_locked];
    CHECK(first == doctest::Approx(e_c).epsilon(0.02));
    REQUIRE(res.intercept);
    CHECK(res.intercept->critical_field == doctest::Approx(10.0 * e_c).epsilon(0.02));
    // Pulling below lock: readouts move monotonically toward the injection.
    for (std::size_t i = 1; i < *res.first_locked; ++i)
        CHECK(res.reports[i].readout >= res.reports[i - 1].readout - 1e-9);
    CHECK(res.matrix.values.size() == cfg.fields.size());
    CHECK(res.matrix.values.front().size() == res.matrix.cols.size());

    // Parallel and serial aggregation match.
    const cli::ColormapResult serial = cli::sweep_field(cfg, osc, 1, gen);
    CHECK(serial.matrix.values == res.matrix.values);
}

TEST_CASE("empty field axis is a config error") {
    RunConfig cfg = parse_config(kReference);
    cfg.fields.clear();
    locking::OscReference osc;
    osc.f_osc = 45e3;
    CHECK_THROWS_AS(cli::sweep_field(cfg, osc, 1), ConfigError);
}

TEST_CASE("a failing cell is named and keeps its category") {
    RunConfig cfg = parse_config(kReference);
    locking::OscReference osc;
    osc.f_osc = 45e3;
    osc.settings = cfg.probe_settings();
    const cli::CellEvaluator boom = [](std::size_t i, double, double) -> cli::CellResult {
        if (i == 2) throw NumericError("step size underflow", 1e-3);
        throw AnalysisError("unreachable");
    };
    try {
        cli::sweep_field(cfg, osc, 1, [&](std::size_t i, double w, double d) {
            return i == 2 ? boom(i, w, d) : cli::CellResult{};
        });
        FAIL("expected failure");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("field_mv_cm=") != std::string::npos);
        CHECK(e.failure_time() == 1e-3);
    } catch (...) {
        FAIL("wrong exception type");
    }
}

TEST_CASE("simulate writes a decay trajectory") {
    const RunConfig cfg = parse_config(R"(schema = 1
[model]
gamma_khz = 25.4
[integration]
t_end_ms = 0.5
)");
    // All-zero start with no drive stays dark: a trivially exact decay.
    const fs::path dir = scratch("simulate");
    cli::run_simulate(cfg, {dir, 1, "simulate"});
    for (const char* f : {"trajectory.csv", "spectrum.csv", "peaks.csv", "manifest.txt"})
        CHECK(fs::exists(dir / f));
    std::ifstream in(dir / "trajectory.csv");
    const io::Table t = io::read_table(in);
    for (const auto& row : t.rows) CHECK(row[t.column("n_r")] == 0.0);
    CHECK(t.metadata.size() >= 5);
}

TEST_CASE("reference simulate run") {
    const RunConfig cfg = parse_config(kReference);
    const fs::path dir = scratch("reference");
    RunConfig undriven = cfg;
    undriven.protocol = DriveProtocol::None;
    cli::run_simulate(undriven, {dir, 1, "simulate"});
    std::ifstream in(dir / "peaks.csv");
    const io::Table t = io::read_table(in);
    int detected = 0;
    for (const auto& row : t.rows) detected += row[t.column("detected")] == 1.0;
    CHECK(detected >= 2);
    CHECK(t.rows[0][t.column("frequency_hz")] == doctest::Approx(45.74e3).epsilon(0.01));
}

TEST_CASE("fit-bandwidth needs a calibration block") {
    RunConfig cfg = parse_config(kReference);
    cfg.calibration.reset();
    CHECK_THROWS_AS(cli::run_fit_bandwidth(cfg, {scratch("fit"), 1, "fit-bandwidth"}), ConfigError);
}

TEST_CASE("fit-bandwidth from a critical-points file recovers K") {
    const fs::path dir = scratch("fitfile");
    fs::create_directories(dir);
    {
        std::ofstream os(dir / "cp.csv");
        os << "# synthetic\noffset_hz,delta_inj_rad_s,omega_rs_crit_rad_s\n";
        for (double w : {1e5, 2e5, 3e5, 4e5})
            os << 0.014 * w / units::two_pi << "," << 0.014 * w << "," << w << "\n";
    }
    RunConfig cfg = parse_config(kReference);
    cfg.critical_points_file = (dir / "cp.csv").string();
    cli::run_fit_bandwidth(cfg, {dir / "out", 1, "fit-bandwidth"});
    std::ifstream in(dir / "out" / "fit_report.csv");
    std::string text((std::istreambuf_iterator<char>(in)), {});
    CHECK(text.find("k_angular,0.014") != std::string::npos);
}

TEST_CASE("calibrate table") {
    RunConfig cfg = parse_config(kReference);
    cfg.fields = {0.42};
    const fs::path dir = scratch("calibrate");
    cli::run_calibrate(cfg, {dir, 1, "calibrate"});
    std::ifstream in(dir / "calibration.csv");
    const io::Table t = io::read_table(in);
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0][t.column("omega_rs_over_gamma")] == doctest::Approx(1.36).epsilon(0.01));
    CHECK(t.rows[0][t.column("half_bandwidth_rad_s")] == doctest::Approx(3.04e3).epsilon(0.01));
}

TEST_CASE("step-on rejects t_on outside the record") {
    RunConfig cfg = parse_config(kReference);
    cfg.t_on = 20e-3;
    locking::OscReference osc;
    osc.f_osc = 45e3;
    CHECK_THROWS_AS(cli::step_on(cfg, osc, 1.0), ConfigError);
}

TEST_CASE("step-on with zero drive never locks") {
    RunConfig cfg = parse_config(std::string(kReference) + "[analysis]\nspectrogram_window_ms = 8\n");
    cfg.integration.t_end = 24e-3;
    cfg.t_on = 10e-3;
    const auto osc = cli::reference_from(cfg);
    const cli::StepOnResult r = cli::step_on(cfg, osc, 0.0);
    CHECK_FALSE(r.acquisition_time);
    for (bool l : r.locked) CHECK_FALSE(l);
    CHECK(r.final_quarter_ratio > 0.5);
}

TEST_CASE("repeated sweeps are byte identical") {
    const RunConfig cfg = parse_config(kReference);
    const fs::path a = scratch("repeat_a"), b = scratch("repeat_b");
    cli::run_sweep_field(cfg, {a, 1, "sweep-field"});
    cli::run_sweep_field(cfg, {b, 3, "sweep-field"});
    for (const char* f : {"colormap_field.csv", "sweep_field.csv", "summary.csv", "manifest.txt"})
        CHECK(slurp(a / f) == slurp(b / f));
    const std::string head = slurp(a / "colormap_field.csv");
    CHECK(head.find("# config_hash=") != std::string::npos);
    CHECK(head.find("# variant=supplementary") != std::string::npos);
    CHECK(head.find("# version=") != std::string::npos);
}
