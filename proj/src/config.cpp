#include "rydlock/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "rydlock/csv_io.hpp"
#include "rydlock/errors.hpp"
#include "rydlock/units.hpp"

namespace rydlock {
namespace {

const std::vector<std::string> kSections = {"model",       "integration", "drive", "analysis",
                                            "calibration", "sweep",       "output"};

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_number(std::string_view text, const std::string& where) {
    text = trim(text);
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc{} || ptr != end || !std::isfinite(v))
        throw ConfigError(where + ": not a finite number: '" + std::string(text) + "'");
    return v;
}

struct Entry {
    std::string value;
    int line = 0;
    bool used = false;
};

class Document {
public:
    explicit Document(std::string_view text) {
        std::string section;
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto nl = text.find('\n', pos);
            std::string_view line = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
            pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
            ++line_no;
            if (const auto hash = line.find('#'); hash != line.npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
                section = std::string(trim(line.substr(1, line.size() - 2)));
                if (std::find(kSections.begin(), kSections.end(), section) == kSections.end())
                    throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" +
                                      section + "]");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == line.npos)
                throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
            auto& sec = entries_[section];
            if (sec.count(key))
                throw ConfigError("line " + std::to_string(line_no) + ": duplicate key " +
                                  name(section, key));
            sec[key] = Entry{value, line_no, false};
        }
    }

    static std::string name(const std::string& section, const std::string& key) {
        return section.empty() ? key : section + "." + key;
    }

    bool has_section(const std::string& section) const { return entries_.count(section) > 0; }

    std::optional<std::string> str(const std::string& section, const std::string& key) {
        auto s = entries_.find(section);
        if (s == entries_.end()) return std::nullopt;
        auto e = s->second.find(key);
        if (e == s->second.end()) return std::nullopt;
        e->second.used = true;
        return e->second.value;
    }

    std::optional<double> num(const std::string& section, const std::string& key) {
        auto v = str(section, key);
        if (!v) return std::nullopt;
        return parse_number(*v, name(section, key));
    }

    std::optional<std::vector<double>> axis(const std::string& section, const std::string& key) {
        auto v = str(section, key);
        if (!v) return std::nullopt;
        try {
            return parse_axis(*v);
        } catch (const ConfigError& e) {
            throw ConfigError(name(section, key) + ": " + e.what());
        }
    }

    void reject_unused() const {
        for (const auto& [section, keys] : entries_)
            for (const auto& [key, entry] : keys)
                if (!entry.used)
                    throw ConfigError("unknown key " + name(section, key) + " (line " +
                                      std::to_string(entry.line) + ")");
    }

private:
    std::map<std::string, std::map<std::string, Entry>> entries_;
};

// Angular rates may be given as <base>_khz (ordinary frequency) or <base>_gamma.
class RateReader {
public:
    RateReader(Document& doc, std::optional<double> gamma) : doc_(doc), gamma_(gamma) {}

    std::optional<double> scalar(const std::string& section, const std::string& base) {
        auto khz = doc_.num(section, base + "_khz");
        auto gam = doc_.num(section, base + "_gamma");
        check(section, base, khz.has_value(), gam.has_value());
        if (khz) return units::khz_to_rad(*khz);
        if (gam) return *gam * *gamma_;
        return std::nullopt;
    }

    std::optional<std::vector<double>> axis(const std::string& section, const std::string& base) {
        auto khz = doc_.axis(section, base + "_khz");
        auto gam = doc_.axis(section, base + "_gamma");
        check(section, base, khz.has_value(), gam.has_value());
        auto v = khz ? khz : gam;
        if (!v) return std::nullopt;
        for (double& x : *v) x = khz ? units::khz_to_rad(x) : x * *gamma_;
        return v;
    }

private:
    void check(const std::string& section, const std::string& base, bool khz, bool gam) const {
        const std::string n = Document::name(section, base);
        if (khz && gam) throw ConfigError(n + ": give either _khz or _gamma, not both");
        if (gam && !gamma_) throw ConfigError(n + "_gamma needs model.gamma_khz");
    }
    Document& doc_;
    std::optional<double> gamma_;
};

double ms(double v) { return 1e-3 * v; }

void require_positive(double v, const std::string& key) {
    if (!(v > 0.0)) throw ConfigError(key + " must be > 0");
}

void require_strictly_monotone(const std::vector<double>& axis, const std::string& key) {
    if (axis.empty()) throw ConfigError(key + ": axis is empty");
    for (std::size_t i = 1; i < axis.size(); ++i)
        if (!(axis[i] > axis[i - 1])) throw ConfigError(key + ": axis must be strictly increasing");
}

}  // namespace

std::vector<double> parse_axis(std::string_view text) {
    text = trim(text);
    if (text.empty()) throw ConfigError("empty axis");
    std::vector<double> out;
    if (text.find(':') != text.npos) {
        std::vector<std::string_view> parts;
        std::size_t pos = 0;
        while (true) {
            const auto c = text.find(':', pos);
            parts.push_back(text.substr(pos, c == text.npos ? text.npos : c - pos));
            if (c == text.npos) break;
            pos = c + 1;
        }
        if (parts.size() != 3) throw ConfigError("range axis must read start:stop:count");
        const double a = parse_number(parts[0], "axis start");
        const double b = parse_number(parts[1], "axis stop");
        const double n = parse_number(parts[2], "axis count");
        if (n < 1 || n != std::floor(n)) throw ConfigError("axis count must be a positive integer");
        const auto count = static_cast<std::size_t>(n);
        if (count == 1) return {a};
        for (std::size_t i = 0; i < count; ++i)
            out.push_back(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
        return out;
    }
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto c = text.find(',', pos);
        out.push_back(parse_number(text.substr(pos, c == text.npos ? text.npos : c - pos), "axis value"));
        if (c == text.npos) break;
        pos = c + 1;
    }
    return out;
}

RunConfig parse_config(std::string_view text) {
    Document doc(text);
    RunConfig cfg;

    const auto schema = doc.num("", "schema");
    if (!schema) throw ConfigError("missing schema (expected schema = 1)");
    if (*schema != kConfigSchema)
        throw ConfigError("unsupported schema " + std::to_string(*schema));

    // model
    std::optional<double> gamma;
    if (auto g = doc.num("model", "gamma_khz")) {
        gamma = units::khz_to_rad(*g);
        cfg.model.gamma = *gamma;
    } else if (doc.has_section("model")) {
        throw ConfigError("model.gamma_khz is required");
    }
    RateReader rate(doc, gamma);
    if (auto v = doc.str("model", "variant")) cfg.variant = parse_variant(*v);
    if (auto v = rate.scalar("model", "omega")) cfg.model.omega = *v;
    if (auto v = rate.scalar("model", "delta_r")) cfg.model.delta_r = *v;
    if (auto v = rate.scalar("model", "delta_s")) cfg.model.delta_s_state = *v;
    if (auto v = rate.scalar("model", "chi")) cfg.model.chi = *v;
    validate(cfg.model);

    // integration
    auto& in = cfg.integration;
    if (auto v = doc.num("integration", "t_start_ms")) in.t_start = ms(*v);
    if (auto v = doc.num("integration", "t_end_ms")) in.t_end = ms(*v);
    if (auto v = doc.num("integration", "sample_rate_khz")) in.sample_rate = 1e3 * *v;
    if (auto v = doc.num("integration", "rel_tol")) in.rel_tol = *v;
    if (auto v = doc.num("integration", "abs_tol")) in.abs_tol = *v;
    if (auto v = doc.num("integration", "max_step_us")) in.max_step = 1e-6 * *v;
    if (auto v = doc.num("integration", "fixed_step_us")) in.fixed_step = 1e-6 * *v;
    if (auto v = doc.num("integration", "expected_khz")) in.expected_frequency = 1e3 * *v;
    validate(in);

    // drive
    if (auto v = doc.str("drive", "protocol")) {
        if (*v == "none") cfg.protocol = DriveProtocol::None;
        else if (*v == "constant") cfg.protocol = DriveProtocol::Constant;
        else if (*v == "step_on") cfg.protocol = DriveProtocol::StepOn;
        else throw ConfigError("drive.protocol must be none, constant or step_on");
    }
    if (auto v = rate.scalar("drive", "omega_rs")) cfg.drive_omega_rs = *v;
    if (auto v = doc.num("drive", "field_mv_cm")) {
        if (*v < 0.0) throw ConfigError("drive.field_mv_cm must be >= 0");
        cfg.drive_field = units::mv_per_cm_to_v_per_m(*v);
    }
    if (cfg.drive_field && cfg.drive_omega_rs != 0.0)
        throw ConfigError("drive: give omega_rs or field_mv_cm, not both");
    if (cfg.drive_omega_rs < 0.0) throw ConfigError("drive.omega_rs must be >= 0");
    if (auto v = doc.num("drive", "f_inj_khz")) cfg.injection_hz = 1e3 * *v;
    if (auto v = doc.num("drive", "offset_khz")) cfg.offset_hz = 1e3 * *v;
    if (cfg.injection_hz && cfg.offset_hz)
        throw ConfigError("drive: give f_inj_khz or offset_khz, not both");
    if (auto v = doc.num("drive", "t_on_ms")) cfg.t_on = ms(*v);
    if (auto v = doc.num("drive", "injection_sign")) {
        if (*v != 1.0 && *v != -1.0) throw ConfigError("drive.injection_sign must be 1 or -1");
        cfg.injection_sign = static_cast<int>(*v);
    }
    if (cfg.protocol == DriveProtocol::StepOn &&
        !(cfg.t_on > in.t_start && cfg.t_on < in.t_end))
        throw ConfigError("drive.t_on_ms must lie inside the integration interval");

    // analysis
    if (auto v = doc.str("analysis", "window")) cfg.window = parse_window(*v);
    if (auto v = doc.num("analysis", "transient_ms")) cfg.transient = ms(*v);
    if (auto v = doc.num("analysis", "lock_record_ms")) cfg.lock_record = ms(*v);
    if (auto v = doc.num("analysis", "lock_transient_ms")) cfg.lock_transient = ms(*v);
    if (auto v = doc.num("analysis", "suppression")) cfg.suppression = *v;
    if (auto v = doc.num("analysis", "band_lo_khz")) cfg.band_lo = 1e3 * *v;
    if (auto v = doc.num("analysis", "band_hi_khz")) cfg.band_hi = 1e3 * *v;
    if (auto v = doc.num("analysis", "harmonics")) {
        if (*v < 1 || *v != std::floor(*v)) throw ConfigError("analysis.harmonics must be a positive integer");
        cfg.harmonics = static_cast<std::size_t>(*v);
    }
    if (auto v = doc.num("analysis", "spectrogram_window_ms")) cfg.spectrogram_window = ms(*v);
    if (auto v = doc.num("analysis", "spectrogram_hop_ms")) cfg.spectrogram_hop = ms(*v);
    if (auto v = doc.num("analysis", "intercept_rows")) {
        if (*v < 2 || *v != std::floor(*v)) throw ConfigError("analysis.intercept_rows must be an integer >= 2");
        cfg.intercept_rows = static_cast<std::size_t>(*v);
    }
    if (auto v = doc.str("analysis", "critical_points_file")) cfg.critical_points_file = *v;
    if (cfg.transient < 0.0 || cfg.transient >= in.t_end - in.t_start)
        throw ConfigError("analysis.transient_ms must lie inside the record");
    if (cfg.band_hi != 0.0 && !(cfg.band_hi > cfg.band_lo))
        throw ConfigError("analysis.band_hi_khz must exceed band_lo_khz");
    require_positive(cfg.spectrogram_window, "analysis.spectrogram_window_ms");
    require_positive(cfg.spectrogram_hop, "analysis.spectrogram_hop_ms");

    // calibration
    if (doc.has_section("calibration")) {
        calibration::MixingInputs m;
        const auto preset = doc.str("calibration", "preset");
        if (preset && *preset != "reference")
            throw ConfigError("calibration.preset must be 'reference'");
        if (preset) m = calibration::reference_mixing();
        auto take = [&](const char* key, double& dst, double scale) {
            if (auto v = doc.num("calibration", key)) dst = *v * scale;
            else if (!preset) throw ConfigError(std::string("calibration.") + key + " is required");
        };
        take("b_gauss", m.b_field, 1e-4);
        take("g_j", m.g_j, 1.0);
        take("m_j", m.m_j, 1.0);
        take("delta_e_ghz", m.delta_e, calibration::PhysicalConstants::h * 1e9);
        take("d_ref", m.d_ref, 1.0);
        take("alpha", m.alpha, 1.0);
        calibration::validate(m);
        cfg.calibration = m;
        if (auto v = doc.num("calibration", "k_forcing")) {
            require_positive(*v, "calibration.k_forcing");
            cfg.k_forcing = *v;
        }
    }
    if (cfg.drive_field && !cfg.calibration)
        throw ConfigError("drive.field_mv_cm needs a [calibration] block");

    // sweep
    if (auto v = doc.axis("sweep", "field_mv_cm")) {
        require_strictly_monotone(*v, "sweep.field_mv_cm");
        if (v->front() < 0.0) throw ConfigError("sweep.field_mv_cm must be >= 0");
        for (double x : *v) cfg.fields.push_back(units::mv_per_cm_to_v_per_m(x));
    }
    if (auto v = doc.axis("sweep", "f_inj_khz")) {
        require_strictly_monotone(v->front() <= v->back() ? *v : std::vector<double>(v->rbegin(), v->rend()),
                                  "sweep.f_inj_khz");
        if (v->front() <= 0.0 || v->back() <= 0.0) throw ConfigError("sweep.f_inj_khz must be > 0");
        for (double x : *v) cfg.injection_axis.push_back(1e3 * x);
    }
    if (auto v = doc.axis("sweep", "offsets_khz"))
        for (double x : *v) cfg.offsets.push_back(units::khz_to_rad(x));
    if (auto v = rate.axis("sweep", "step_omega_rs")) cfg.step_rabi = *v;
    if (auto v = doc.str("sweep", "mode")) {
        if (*v == "independent") cfg.mode = SweepMode::Independent;
        else if (*v == "ramp") cfg.mode = SweepMode::Ramp;
        else throw ConfigError("sweep.mode must be independent or ramp");
    }
    if (auto v = doc.num("sweep", "ramp_rate_khz_per_ms")) {
        require_positive(*v, "sweep.ramp_rate_khz_per_ms");
        cfg.ramp_rate = 1e6 * *v;
    }
    if (auto v = rate.scalar("sweep", "omega_rs_lo")) cfg.omega_lo = *v;
    if (auto v = rate.scalar("sweep", "omega_rs_hi")) cfg.omega_hi = *v;
    if (auto v = rate.axis("sweep", "scan_omega")) cfg.scan_omega = *v;
    if (auto v = rate.axis("sweep", "scan_delta_r")) cfg.scan_delta_r = *v;
    if (auto v = rate.axis("sweep", "scan_delta_s")) cfg.scan_delta_s = *v;
    if (auto v = rate.axis("sweep", "scan_chi")) cfg.scan_chi = *v;
    if (auto v = doc.num("sweep", "scan_target_khz")) cfg.scan_target = 1e3 * *v;
    if (auto v = doc.num("sweep", "scan_record_ms")) cfg.scan_record = ms(*v);

    // output
    if (auto v = doc.str("output", "dir")) cfg.out_dir = *v;

    doc.reject_unused();
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string RunConfig::canonical() const {
    using io::format_double;
    std::ostringstream os;
    auto line = [&](const char* key, const std::string& v) { os << key << '=' << v << '\n'; };
    auto num = [&](const char* key, double v) { line(key, format_double(v)); };
    auto list = [&](const char* key, const std::vector<double>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
        line(key, s);
    };
    line("schema", std::to_string(kConfigSchema));
    line("model.variant", std::string(to_string(variant)));
    num("model.gamma_rad_s", model.gamma);
    num("model.omega_rad_s", model.omega);
    num("model.delta_r_rad_s", model.delta_r);
    num("model.delta_s_rad_s", model.delta_s_state);
    num("model.chi_rad_s", model.chi);
    num("integration.t_start_s", integration.t_start);
    num("integration.t_end_s", integration.t_end);
    num("integration.sample_rate_hz", integration.sample_rate);
    num("integration.rel_tol", integration.rel_tol);
    num("integration.abs_tol", integration.abs_tol);
    num("integration.max_step_s", integration.max_step);
    num("integration.fixed_step_s", integration.fixed_step);
    num("integration.expected_hz", integration.expected_frequency);
    const char* proto = protocol == DriveProtocol::None       ? "none"
                        : protocol == DriveProtocol::Constant ? "constant"
                                                              : "step_on";
    line("drive.protocol", proto);
    num("drive.omega_rs_rad_s", drive_omega_rs);
    if (drive_field) num("drive.field_v_m", *drive_field);
    if (injection_hz) num("drive.f_inj_hz", *injection_hz);
    if (offset_hz) num("drive.offset_hz", *offset_hz);
    num("drive.t_on_s", t_on);
    line("drive.injection_sign", std::to_string(injection_sign));
    line("analysis.window", std::string(to_string(window)));
    num("analysis.transient_s", transient);
    num("analysis.lock_record_s", lock_record);
    num("analysis.lock_transient_s", lock_transient);
    num("analysis.suppression", suppression);
    num("analysis.band_lo_hz", band_lo);
    num("analysis.band_hi_hz", band_hi);
    line("analysis.harmonics", std::to_string(harmonics));
    num("analysis.spectrogram_window_s", spectrogram_window);
    num("analysis.spectrogram_hop_s", spectrogram_hop);
    line("analysis.intercept_rows", std::to_string(intercept_rows));
    if (!critical_points_file.empty()) line("analysis.critical_points_file", critical_points_file);
    if (calibration) {
        num("calibration.b_field_t", calibration->b_field);
        num("calibration.g_j", calibration->g_j);
        num("calibration.m_j", calibration->m_j);
        num("calibration.delta_e_j", calibration->delta_e);
        num("calibration.d_ref_c_m", calibration->d_ref);
        num("calibration.alpha", calibration->alpha);
    }
    if (k_forcing) num("calibration.k_forcing", *k_forcing);
    if (!fields.empty()) list("sweep.field_v_m", fields);
    if (!injection_axis.empty()) list("sweep.f_inj_hz", injection_axis);
    if (!offsets.empty()) list("sweep.offsets_rad_s", offsets);
    if (!step_rabi.empty()) list("sweep.step_omega_rs_rad_s", step_rabi);
    line("sweep.mode", mode == SweepMode::Independent ? "independent" : "ramp");
    num("sweep.ramp_rate_hz_s", ramp_rate);
    num("sweep.omega_rs_lo_rad_s", omega_lo);
    num("sweep.omega_rs_hi_rad_s", omega_hi);
    if (!scan_omega.empty()) list("sweep.scan_omega_rad_s", scan_omega);
    if (!scan_delta_r.empty()) list("sweep.scan_delta_r_rad_s", scan_delta_r);
    if (!scan_delta_s.empty()) list("sweep.scan_delta_s_rad_s", scan_delta_s);
    if (!scan_chi.empty()) list("sweep.scan_chi_rad_s", scan_chi);
    num("sweep.scan_target_hz", scan_target);
    num("sweep.scan_record_s", scan_record);
    return os.str();
}

locking::ProbeSettings RunConfig::probe_settings() const {
    locking::ProbeSettings s;
    s.variant = variant;
    s.record = lock_record;
    s.transient = lock_transient;
    s.sample_rate = integration.sample_rate;
    s.rel_tol = integration.rel_tol;
    s.abs_tol = integration.abs_tol;
    s.max_step = integration.max_step;
    s.suppression = suppression;
    s.injection_sign = injection_sign;
    locking::validate(s);
    return s;
}

locking::ScanGrid RunConfig::scan_grid() const {
    locking::ScanGrid g;
    g.gamma = model.gamma;
    g.omega = scan_omega;
    g.delta_r = scan_delta_r;
    g.delta_s = scan_delta_s;
    g.chi = scan_chi;
    g.target_frequency = scan_target;
    g.record = scan_record;
    if (g.size() == 0) throw ConfigError("scan-osc needs sweep.scan_omega/delta_r/delta_s/chi axes");
    return g;
}

}  // namespace rydlock
