#include "cimpc/scenario.hpp"

#include "cimpc/analytic.hpp"
#include "cimpc/smallsignal.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#ifndef CIMPC_SCENARIO_DIR
#define CIMPC_SCENARIO_DIR "scenarios"
#endif

namespace cimpc::scenario {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> keys = {
        {"params",
         {"base", "v_bat", "n_ratio", "l_mag", "l_e", "c_out", "c_aux", "c_bat", "f_sw", "r_load",
          "r_aux", "r_le", "v_diode", "r_bat_source", "leg", "bridge_duty", "dead_time"}},
        {"control",
         {"mode", "main_ref", "aux_ref", "aux_mode", "main_loop", "d", "phi", "bridge", "start",
          "phi_max", "duty_min", "duty_max", "initial_duty", "kp_main", "ki_main", "kp_aux",
          "ki_aux"}},
        {"events", {}},
        {"run",
         {"duration", "dt", "decimation", "record_from", "integrator", "hold_v_out", "hold_v_aux",
          "initial", "i_mag0", "i_le0", "v_out0", "v_aux0"}},
        {"windows", {}},
    };
    return keys;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// The INI reader keeps everything after '=' verbatim.
std::string strip_comment(const std::string& value) {
    for (std::size_t i = 1; i < value.size(); ++i) {
        if ((value[i] == ';' || value[i] == '#') && (value[i - 1] == ' ' || value[i - 1] == '\t')) {
            return trim(value.substr(0, i));
        }
    }
    return trim(value);
}

class Source {
public:
    Source(std::string name, std::string text) : name_(std::move(name)), text_(std::move(text)) {}

    // Line of `key` inside `[section]`, 0 when not found.
    int line_of(const std::string& section, const std::string& key) const {
        std::istringstream in(text_);
        std::string line;
        std::string current;
        int n = 0;
        while (std::getline(in, line)) {
            ++n;
            const std::string t = trim(line);
            if (t.empty() || t[0] == ';' || t[0] == '#') continue;
            if (t.front() == '[') {
                current = trim(t.substr(1, t.find(']') - 1));
                if (key.empty() && current == section) return n;
                continue;
            }
            const auto eq = t.find('=');
            if (eq != std::string::npos && current == section && trim(t.substr(0, eq)) == key) {
                return n;
            }
        }
        return 0;
    }

    // Every [section] header, including empty ones the INI reader drops.
    std::vector<std::string> sections() const {
        std::istringstream in(text_);
        std::string line;
        std::vector<std::string> out;
        while (std::getline(in, line)) {
            const std::string t = trim(line);
            if (!t.empty() && t.front() == '[') out.push_back(trim(t.substr(1, t.find(']') - 1)));
        }
        return out;
    }

    [[noreturn]] void fail(const std::string& section, const std::string& key,
                           const std::string& what) const {
        std::ostringstream os;
        os << name_;
        const int line = line_of(section, key);
        if (line > 0) os << ':' << line;
        os << ": [" << section << ']';
        if (!key.empty()) os << ' ' << key;
        os << ": " << what;
        throw ScenarioError(os.str());
    }

    const std::string& name() const { return name_; }

private:
    std::string name_;
    std::string text_;
};

double to_double(const Source& src, const std::string& section, const std::string& key,
                 const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        src.fail(section, key, "expected a number, got '" + text + "'");
    }
    if (used != text.size() || !std::isfinite(v)) {
        src.fail(section, key, "expected a number, got '" + text + "'");
    }
    return v;
}

bool to_bool(const Source& src, const std::string& section, const std::string& key,
             const std::string& text) {
    if (text == "true" || text == "on" || text == "yes" || text == "1") return true;
    if (text == "false" || text == "off" || text == "no" || text == "0") return false;
    src.fail(section, key, "expected on/off, got '" + text + "'");
}

std::vector<std::string> words(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

// Section view with typed getters; tracks nothing, keys are checked up front.
struct Section {
    const Source& src;
    std::string name;
    const pt::ptree* tree;

    std::optional<std::string> raw(const std::string& key) const {
        if (!tree) return std::nullopt;
        const auto child = tree->get_child_optional(pt::ptree::path_type(key, '\0'));
        if (!child) return std::nullopt;
        return strip_comment(child->data());
    }
    void number(const std::string& key, double& out) const {
        if (auto v = raw(key)) out = to_double(src, name, key, *v);
    }
    void number(const std::string& key, std::optional<double>& out) const {
        if (auto v = raw(key)) out = to_double(src, name, key, *v);
    }
    void flag(const std::string& key, bool& out) const {
        if (auto v = raw(key)) out = to_bool(src, name, key, *v);
    }
    template <typename E>
    void choice(const std::string& key, E& out,
                std::initializer_list<std::pair<const char*, E>> options) const {
        const auto v = raw(key);
        if (!v) return;
        for (const auto& [label, value] : options) {
            if (*v == label) {
                out = value;
                return;
            }
        }
        std::string allowed;
        for (const auto& o : options) allowed += std::string(allowed.empty() ? "" : "|") + o.first;
        src.fail(name, key, "expected " + allowed + ", got '" + *v + "'");
    }
};

void check_keys(const Source& src, const pt::ptree& root) {
    for (const auto& section : src.sections()) {
        if (!schema().count(section)) src.fail(section, "", "unknown section");
    }
    for (const auto& [section, body] : root) {
        if (body.empty() && !body.data().empty()) {
            std::ostringstream os;
            os << src.name() << ": key '" << section << "' outside any section";
            throw ScenarioError(os.str());
        }
        const auto it = schema().find(section);
        if (it == schema().end()) src.fail(section, "", "unknown section");
        for (const auto& [key, value] : body) {
            if (!it->second.empty() && !it->second.count(key)) {
                src.fail(section, key, "unknown key");
            }
        }
    }
}

control::EventKind event_kind(const Source& src, const std::string& key, const std::string& word,
                              sim::Port& port) {
    if (word == "enable_active") return control::EventKind::enable_active;
    if (word == "aux_ref") return control::EventKind::aux_ref;
    if (word == "main_ref") return control::EventKind::main_ref;
    if (word == "main_load") {
        port = sim::Port::main;
        return control::EventKind::load;
    }
    if (word == "aux_load") {
        port = sim::Port::aux;
        return control::EventKind::load;
    }
    src.fail("events", key,
             "unknown event kind '" + word +
                 "' (enable_active|aux_ref|main_ref|main_load|aux_load)");
}

}  // namespace

ScenarioConfig default_scenario() {
    ScenarioConfig c;
    c.set = table2_defaults();
    c.open_cmd = c.set.cmd;
    const auto chain = smallsignal::design_chain(c.set);
    c.loop.main = chain.main;
    c.loop.aux = chain.aux_loop;
    c.loop.plan.main_ref = c.set.op.v_out;
    c.loop.plan.aux_ref = c.set.op.v_aux;
    return c;
}

ScenarioConfig parse_scenario(std::istream& in, const std::string& name) {
    std::stringstream buffer;
    buffer << in.rdbuf();
    const Source src(name, buffer.str());

    pt::ptree root;
    try {
        std::istringstream text(buffer.str());
        pt::ini_parser::read_ini(text, root);
    } catch (const pt::ini_parser_error& e) {
        std::ostringstream os;
        os << name << ':' << e.line() << ": " << e.message();
        throw ScenarioError(os.str());
    }
    check_keys(src, root);

    auto section = [&](const std::string& s) {
        const auto child = root.get_child_optional(s);
        return Section{src, s, child ? &*child : nullptr};
    };
    const Section params = section("params");
    const Section ctl = section("control");
    const Section events = section("events");
    const Section run = section("run");
    const Section windows = section("windows");

    ScenarioConfig c;
    c.name = name;
    if (auto b = params.raw("base")) c.base = *b;
    if (c.base == "table2") {
        c.set = table2_defaults();
    } else if (c.base == "table3") {
        c.set = table3_defaults();
    } else {
        src.fail("params", "base", "expected table2|table3, got '" + c.base + "'");
    }
    // Gains come from the design chain of the unmodified base set.
    const auto chain = smallsignal::design_chain(c.set);

    ConverterParams& p = c.set.params;
    params.number("v_bat", p.v_bat);
    params.number("n_ratio", p.n_ratio);
    params.number("l_mag", p.l_mag);
    params.number("l_e", p.l_e);
    params.number("c_out", p.c_out);
    params.number("c_aux", p.c_aux);
    params.number("c_bat", p.c_bat);
    params.number("f_sw", p.f_sw);
    params.number("r_load", p.r_load);
    params.number("r_aux", p.r_aux);
    params.number("r_le", c.network.parasitics.r_le);
    params.number("v_diode", c.network.parasitics.v_diode);
    params.number("r_bat_source", c.network.parasitics.r_bat_source);
    params.choice("leg", c.network.leg,
                  {{"synchronous", LegMode::synchronous}, {"diode", LegMode::diode}});
    c.schedule.leg = c.network.leg;
    params.choice("bridge_duty", c.schedule.bridge_duty,
                  {{"track", BridgeDuty::track_primary}, {"half", BridgeDuty::half}});
    params.number("dead_time", c.schedule.dead_time);
    if (c.network.parasitics.r_le < 0.0 || c.network.parasitics.v_diode < 0.0 ||
        c.network.parasitics.r_bat_source < 0.0) {
        src.fail("params", "", "parasitic elements must be non-negative");
    }
    if (c.schedule.dead_time < 0.0 || c.schedule.dead_time >= 0.05 * p.period()) {
        src.fail("params", "dead_time", "must lie in [0, T/20)");
    }
    c.set.op.t_period = p.period();

    ctl.choice("mode", c.control_mode, {{"closed", ControlMode::closed}, {"open", ControlMode::open}});
    c.loop.main = chain.main;
    c.loop.aux = chain.aux_loop;
    c.loop.plan.main_ref = c.set.op.v_out;
    c.loop.plan.aux_ref = c.set.op.v_aux;
    ctl.number("main_ref", c.loop.plan.main_ref);
    ctl.number("aux_ref", c.loop.plan.aux_ref);
    ctl.choice("aux_mode", c.loop.aux_mode,
               {{"voltage", control::AuxMode::voltage}, {"current", control::AuxMode::current}});
    if (c.loop.aux_mode == control::AuxMode::current) {
        c.loop.aux = control::design_aux_current_loop(chain.aux, c.set.op.v_aux, chain.aux_loop);
    }
    bool main_loop = true;
    ctl.flag("main_loop", main_loop);
    c.open_cmd = c.set.cmd;
    ctl.number("d", c.open_cmd.d);
    ctl.number("phi", c.open_cmd.phi);
    ctl.choice("bridge", c.open_bridge, {{"active", BridgeMode::active}, {"passive", BridgeMode::passive}});
    BridgeMode start = BridgeMode::active;
    ctl.choice("start", start, {{"active", BridgeMode::active}, {"passive", BridgeMode::passive}});
    c.loop.plan.start_passive = start == BridgeMode::passive;
    ctl.number("phi_max", c.loop.phi_max);
    ctl.number("duty_min", c.loop.duty_min);
    ctl.number("duty_max", c.loop.duty_max);
    ctl.number("initial_duty", c.loop.initial_duty);
    ctl.number("kp_main", c.loop.main.kp);
    ctl.number("ki_main", c.loop.main.ki);
    ctl.number("kp_aux", c.loop.aux.kp);
    ctl.number("ki_aux", c.loop.aux.ki);
    if (!main_loop) c.loop.forced_duty = c.open_cmd.d;

    if (!(c.loop.phi_max > 0.0 && c.loop.phi_max <= kPhaseShiftLimit)) {
        src.fail("control", "phi_max", "phase-shift limit must lie in (0, 0.25]");
    }
    if (!(c.loop.duty_min > 0.0 && c.loop.duty_min < c.loop.duty_max && c.loop.duty_max < 1.0)) {
        src.fail("control", "duty_min", "duty limits must satisfy 0 < duty_min < duty_max < 1");
    }
    if (!(c.loop.plan.main_ref > 0.0)) src.fail("control", "main_ref", "must be positive");

    const ValidationReport report = validate(p, c.open_cmd);
    if (!report.ok()) {
        throw ScenarioError(name + ": " + report.summary());
    }
    c.warnings = report.warnings;

    if (events.tree) {
        double last = -1.0;
        for (const auto& [label, value] : *events.tree) {
            const auto w = words(strip_comment(value.data()));
            if (w.size() < 2 || w.size() > 3) {
                src.fail("events", label, "expected '<time> <kind> [value]'");
            }
            control::SupervisorEvent e;
            e.t = to_double(src, "events", label, w[0]);
            e.kind = event_kind(src, label, w[1], e.port);
            if (e.kind == control::EventKind::enable_active) {
                if (w.size() != 2) src.fail("events", label, "enable_active takes no value");
            } else {
                if (w.size() != 3) src.fail("events", label, w[1] + " needs a value");
                e.value = to_double(src, "events", label, w[2]);
            }
            if (e.t < last) src.fail("events", label, "events must be listed in time order");
            last = e.t;
            if (c.control_mode == ControlMode::open && e.kind != control::EventKind::load) {
                src.fail("events", label, "open-loop scenarios accept only load events");
            }
            c.loop.plan.events.push_back(e);
        }
    }
    try {
        control::validate_plan(c.loop.plan);
    } catch (const std::invalid_argument& e) {
        src.fail("events", "", e.what());
    }

    run.number("duration", c.duration);
    run.number("dt", c.dt);
    double decimation = static_cast<double>(c.decimation);
    run.number("decimation", decimation);
    if (!(decimation >= 1.0) || decimation != std::floor(decimation)) {
        src.fail("run", "decimation", "must be a positive integer");
    }
    c.decimation = static_cast<std::size_t>(decimation);
    run.number("record_from", c.record_from);
    run.choice("integrator", c.integrator,
               {{"rk4", sim::Integrator::rk4}, {"exact", sim::Integrator::exact}});
    run.flag("hold_v_out", c.network.hold_v_out);
    run.flag("hold_v_aux", c.network.hold_v_aux);
    run.choice("initial", c.initial,
               {{"default", InitialMode::standard}, {"periodic", InitialMode::periodic}});
    run.number("i_mag0", c.i_mag0);
    run.number("i_le0", c.i_le0);
    run.number("v_out0", c.v_out0);
    run.number("v_aux0", c.v_aux0);

    const double period = p.period();
    if (!(c.duration > 0.0)) src.fail("run", "duration", "must be positive");
    if (c.dt < 0.0) src.fail("run", "dt", "must be positive (0 selects T/2000)");
    if (c.dt > 0.0) {
        const double ratio = period / c.dt;
        if (std::abs(ratio - std::round(ratio)) > 1e-6 * ratio ||
            std::round(ratio) < sim::kMinStepsPerPeriod) {
            src.fail("run", "dt", "must be T/n with integer n >= 1000");
        }
    }
    if (!c.loop.plan.events.empty()) {
        const double need = c.loop.plan.events.back().t + 50.0 * period;
        if (c.duration < need * (1.0 - 1e-12)) {
            std::ostringstream os;
            os << "duration " << c.duration << " s must cover the last event plus 50 periods ("
               << need << " s)";
            src.fail("run", "duration", os.str());
        }
    }
    if (c.initial == InitialMode::periodic && std::abs(c.open_cmd.d - 0.5) > 1e-12) {
        src.fail("run", "initial", "periodic start requires d = 0.5");
    }

    if (windows.tree) {
        for (const auto& [label, value] : *windows.tree) {
            const auto w = words(strip_comment(value.data()));
            if (w.size() != 2) src.fail("windows", label, "expected '<t_begin> <t_end>'");
            NamedWindow nw{label, {to_double(src, "windows", label, w[0]),
                                   to_double(src, "windows", label, w[1])}};
            if (!(nw.window.t_begin >= 0.0 && nw.window.t_end > nw.window.t_begin &&
                  nw.window.t_end <= c.duration * (1.0 + 1e-12))) {
                src.fail("windows", label, "window must satisfy 0 <= t_begin < t_end <= duration");
            }
            c.windows.push_back(nw);
        }
    }
    return c;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open " + path + ": " + std::strerror(errno));
    std::string name = path;
    const auto slash = name.find_last_of('/');
    if (slash != std::string::npos) name = name.substr(slash + 1);
    ScenarioConfig c = parse_scenario(in, path);
    c.name = name.substr(0, name.rfind(".scenario"));
    return c;
}

std::string bundled_path(const std::string& file_name) {
    return std::string(CIMPC_SCENARIO_DIR) + "/" + file_name;
}

sim::StateVector periodic_start(const ConverterParams& params, const ModulationCommand& cmd,
                                const OperatingPoint& op, bool active) {
    sim::StateVector x;
    x.v_out = op.v_out;
    x.v_aux = op.v_aux;
    x.v_bat_node = params.v_bat;
    double p_aux = 0.0;
    if (active) {
        x.i_le = analytic::boundary_currents(params, cmd, op).i1;
        p_aux = analytic::aux_power(params, cmd, op);
    }
    const double i_avg = (op.v_out * op.v_out / params.r_load + p_aux) / params.v_bat;
    x.i_mag = i_avg - params.v_bat * cmd.d * op.t_period / (2.0 * params.l_mag);
    return x;
}

sim::SimulationOptions simulation_options(const ScenarioConfig& c) {
    sim::SimulationOptions o;
    o.dt = c.dt;
    o.duration = c.duration;
    o.network = c.network;
    o.schedule = c.schedule;
    o.integrator = c.integrator;
    o.decimation = c.decimation;
    o.record_from = c.record_from;

    const ConverterParams& p = c.set.params;
    sim::StateVector x = sim::initial_state(p);
    if (c.initial == InitialMode::periodic) {
        const OperatingPoint op{c.v_out0.value_or(c.loop.plan.main_ref),
                                c.v_aux0.value_or(c.loop.plan.aux_ref), p.period()};
        const bool active = c.control_mode == ControlMode::closed
                                ? !c.loop.plan.start_passive
                                : c.open_bridge == BridgeMode::active;
        x = periodic_start(p, c.open_cmd, op, active);
    }
    if (c.i_mag0) x.i_mag = *c.i_mag0;
    if (c.i_le0) x.i_le = *c.i_le0;
    if (c.v_out0) x.v_out = *c.v_out0;
    if (c.v_aux0) x.v_aux = *c.v_aux0;
    o.initial = x;
    o.initial_set = true;
    return o;
}

sim::SimulationResult run_scenario(const ScenarioConfig& c) {
    const auto options = simulation_options(c);
    const auto events = control::load_events(c.loop.plan);
    if (c.control_mode == ControlMode::open) {
        sim::FixedController controller(c.open_cmd, c.open_bridge);
        return sim::run_with_controller(c.set.params, controller, events, options);
    }
    control::ClosedLoopController controller(c.set.params, c.loop);
    return sim::run_with_controller(c.set.params, controller, events, options);
}

analysis::AnalysisReport summarize(const ScenarioConfig& c, const sim::SimulationResult& r) {
    analysis::AnalysisReport report;
    report.title = c.name;
    const auto& cycles = r.cycles;
    for (const auto& w : c.windows) {
        for (const char* ch : {"v_out", "v_aux"}) {
            std::ostringstream label;
            label << w.name << ' ' << ch;
            try {
                report.ripple.push_back({label.str(), analysis::cycle_ripple(cycles, ch, w.window)});
            } catch (const analysis::AnalysisError& e) {
                report.notes.push_back(label.str() + ": " + e.what());
            }
        }
        for (const char* port : {"p_in", "p_main_load", "p_aux_load", "p_loss"}) {
            const auto pw = analysis::average_power(cycles, port, w.window, r.period);
            report.powers.push_back({w.name + ' ' + port, pw.watts});
            if (!pw.warning.empty()) report.notes.push_back(w.name + ": " + pw.warning);
        }
        std::ostringstream means;
        means << std::setprecision(6) << w.name << " mean v_out = "
              << analysis::mean(cycles, "v_out", w.window)
              << " V, v_aux = " << analysis::mean(cycles, "v_aux", w.window) << " V";
        if (cycles.has("main:u")) {
            means << ", d = " << analysis::mean(cycles, "main:u", w.window)
                  << ", phi = " << analysis::mean(cycles, "aux:u", w.window);
        }
        report.notes.push_back(means.str());
    }

    const auto& events = c.loop.plan.events;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const auto& e = events[i];
        const double t_end = i + 1 < events.size() ? events[i + 1].t : c.duration;
        if (t_end <= e.t) continue;
        const auto sup = control::supervisor_step(c.loop.plan, e.t);
        std::ostringstream label;
        label << "event@" << e.t;
        report.events.push_back(
            {label.str(), "v_out",
             analysis::settling(cycles, "v_out", sup.main_ref, e.t, t_end, 0.01)});
        if (c.loop.aux_mode == control::AuxMode::voltage) {
            report.events.push_back(
                {label.str(), "v_aux",
                 analysis::settling(cycles, "v_aux", sup.aux_ref, e.t, t_end, 0.01)});
        }
    }
    for (const auto& w : c.warnings) report.notes.push_back("warning: " + w);
    return report;
}

std::string describe(const ScenarioConfig& c) {
    const ConverterParams& p = c.set.params;
    std::ostringstream os;
    os << std::setprecision(6);
    os << "scenario " << c.name << " (base " << c.base << ")\n";
    os << "params: v_bat=" << p.v_bat << " n_ratio=" << p.n_ratio << " l_mag=" << p.l_mag
       << " l_e=" << p.l_e << " c_out=" << p.c_out << " c_aux=" << p.c_aux << " c_bat=" << p.c_bat
       << " f_sw=" << p.f_sw << " r_load=" << p.r_load << " r_aux=" << p.r_aux << '\n';
    os << "parasitics: r_le=" << c.network.parasitics.r_le
       << " v_diode=" << c.network.parasitics.v_diode
       << " r_bat_source=" << c.network.parasitics.r_bat_source
       << " dead_time=" << c.schedule.dead_time << '\n';
    if (c.control_mode == ControlMode::open) {
        os << "control: open d=" << c.open_cmd.d << " phi=" << c.open_cmd.phi << " bridge="
           << (c.open_bridge == BridgeMode::active ? "active" : "passive") << '\n';
    } else {
        os << "control: closed main_ref=" << c.loop.plan.main_ref
           << " aux_ref=" << c.loop.plan.aux_ref
           << (c.loop.aux_mode == control::AuxMode::current ? " (A)" : " (V)");
        if (c.loop.forced_duty) os << " forced d=" << *c.loop.forced_duty;
        os << "\n  main kp=" << c.loop.main.kp << " ki=" << c.loop.main.ki
           << "  aux kp=" << c.loop.aux.kp << " ki=" << c.loop.aux.ki << '\n';
    }
    for (const auto& e : c.loop.plan.events) {
        static const char* kinds[] = {"enable_active", "aux_ref", "main_ref", "load"};
        os << "event t=" << e.t << ' ' << kinds[static_cast<int>(e.kind)];
        if (e.kind == control::EventKind::load) {
            os << (e.port == sim::Port::main ? " main " : " aux ") << e.value << " ohm";
        } else if (e.kind != control::EventKind::enable_active) {
            os << ' ' << e.value;
        }
        os << '\n';
    }
    os << "run: duration=" << c.duration << " s dt=" << (c.dt > 0.0 ? c.dt : p.period() / 2000)
       << " s decimation=" << c.decimation << '\n';
    for (const auto& w : c.windows) {
        os << "window " << w.name << ": " << w.window.t_begin << " .. " << w.window.t_end << " s\n";
    }
    for (const auto& w : c.warnings) os << "warning: " << w << '\n';
    return os.str();
}

}  // namespace cimpc::scenario
