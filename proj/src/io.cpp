#include "selltime/io.hpp"

#include <charconv>
#include <limits>
#include <sstream>

namespace selltime {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
    nlohmann::json j;
    j["kernel"]["name"] = c.kernel_name;
    j["kernel"]["params"] = c.kernel_params;
    j["solve"]["horizon"] = c.solve.horizon;
    j["solve"]["discount"] = c.solve.discount;
    j["solve"]["mode"] = to_string(c.solve.mode);
    j["solve"]["n_theta"] = c.solve.n_theta;
    j["solve"]["n_distortion"] = c.solve.n_distortion;
    j["solve"]["n_quad"] = c.solve.n_quad;
    j["solve"]["tie_tol"] = c.solve.tie_tol;
    j["solve"]["sale_cost"] = c.solve.sale_cost;
    j["solve"]["distortion_min"] = c.solve.distortion_min;
    j["solve"]["distortion_max"] = c.solve.distortion_max;
    j["checks"]["integral_monotonicity"] = c.check_integral_monotonicity;
    j["checks"]["corollary2"] = c.check_corollary2;
    j["checks"]["two_period"] = c.check_two_period;
    j["checks"]["best_response"] = c.check_best_response;
    j["checks"]["expost_ir"] = c.check_expost_ir;
    j["checks"]["myopic"] = c.check_myopic;
    j["checks"]["n_ctx"] = c.plan.n_ctx;
    j["checks"]["n_pairs"] = c.plan.n_pairs;
    j["checks"]["n_quad"] = c.plan.n_quad;
    j["checks"]["tol"] = c.plan.tol;
    j["checks"]["seed"] = c.plan.seed;
    j["checks"]["best_response_types"] = c.best_response_types;
    j["simulate"]["paths"] = c.sim_paths;
    j["simulate"]["seed"] = c.seed;
    j["sweep"]["axis"] = c.sweep_axis;
    j["sweep"]["values"] = c.sweep_values;
    j["output"]["dir"] = c.out_dir;
    j["output"]["csv"] = c.write_csv;
    j["output"]["json"] = c.write_json;
    return j;
}

namespace {

template <typename T>
void maybe_get(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig c;
    if (j.contains("kernel")) {
        const auto& k = j.at("kernel");
        maybe_get(k, "name", c.kernel_name);
        if (k.contains("params"))
            c.kernel_params = k.at("params").get<std::map<std::string, double>>();
    }
    if (j.contains("solve")) {
        const auto& s = j.at("solve");
        maybe_get(s, "horizon", c.solve.horizon);
        maybe_get(s, "discount", c.solve.discount);
        if (s.contains("mode")) c.solve.mode = sale_mode_from_string(s.at("mode").get<std::string>());
        maybe_get(s, "n_theta", c.solve.n_theta);
        maybe_get(s, "n_distortion", c.solve.n_distortion);
        maybe_get(s, "n_quad", c.solve.n_quad);
        maybe_get(s, "tie_tol", c.solve.tie_tol);
        maybe_get(s, "sale_cost", c.solve.sale_cost);
        maybe_get(s, "distortion_min", c.solve.distortion_min);
        maybe_get(s, "distortion_max", c.solve.distortion_max);
    }
    if (j.contains("checks")) {
        const auto& s = j.at("checks");
        maybe_get(s, "integral_monotonicity", c.check_integral_monotonicity);
        maybe_get(s, "corollary2", c.check_corollary2);
        maybe_get(s, "two_period", c.check_two_period);
        maybe_get(s, "best_response", c.check_best_response);
        maybe_get(s, "expost_ir", c.check_expost_ir);
        maybe_get(s, "myopic", c.check_myopic);
        maybe_get(s, "n_ctx", c.plan.n_ctx);
        maybe_get(s, "n_pairs", c.plan.n_pairs);
        maybe_get(s, "n_quad", c.plan.n_quad);
        maybe_get(s, "tol", c.plan.tol);
        maybe_get(s, "seed", c.plan.seed);
        maybe_get(s, "best_response_types", c.best_response_types);
    }
    if (j.contains("simulate")) {
        const auto& s = j.at("simulate");
        maybe_get(s, "paths", c.sim_paths);
        maybe_get(s, "seed", c.seed);
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        maybe_get(s, "axis", c.sweep_axis);
        if (s.contains("values")) c.sweep_values = s.at("values").get<std::vector<double>>();
    }
    if (j.contains("output")) {
        const auto& s = j.at("output");
        maybe_get(s, "dir", c.out_dir);
        maybe_get(s, "csv", c.write_csv);
        maybe_get(s, "json", c.write_json);
    }
    return c;
}

std::string config_hash(const RunConfig& c) {
    std::ostringstream os;
    os << std::hex << fnv1a64(run_config_to_json(c).dump());
    return os.str();
}

std::string csv_meta_line(const std::string& cfg_hash) {
    return std::string("# selltime ") + kToolVersion + " config " + cfg_hash + "\n";
}

std::string tables_to_csv(const SolveResult& r, const std::string& meta) {
    std::ostringstream os;
    os << meta << "t,theta,L,psi,M,q,V\n";
    const int nth = r.grid.n_theta(), nl = r.grid.n_distortion();
    for (int t = 1; t <= r.config.horizon; ++t) {
        const auto& tab = r.tables[t - 1];
        const int jmax = (t == 1) ? 1 : nl;
        for (int i = 0; i < nth; ++i) {
            for (int j = 0; j < jmax; ++j) {
                const size_t idx = (t == 1) ? i : static_cast<size_t>(i) * nl + j;
                const double L = (t == 1) ? tab.distortion_row[i] : r.grid.distortion_nodes[j];
                os << t << ',' << format_double(r.grid.theta_nodes[i]) << ',' << format_double(L)
                   << ',' << format_double(r.grid.theta_nodes[i] - L) << ','
                   << format_double(tab.cont[idx]) << ',' << int(tab.sell[idx]) << ','
                   << format_double(tab.value[idx]) << '\n';
            }
        }
    }
    return os.str();
}

nlohmann::json thresholds_to_json(const SolveResult& r, const std::string& cfg_hash) {
    nlohmann::json j;
    j["version"] = kToolVersion;
    j["config_hash"] = cfg_hash;
    j["kernel"] = r.kernel->name();
    j["mode"] = to_string(r.config.mode);
    j["horizon"] = r.config.horizon;
    j["discount"] = r.config.discount;
    nlohmann::json curves = nlohmann::json::array();
    for (const auto& c : r.thresholds) {
        nlohmann::json jc;
        jc["t"] = c.t;
        jc["threshold_structure"] = c.threshold_structure;
        nlohmann::json entries = nlohmann::json::array();
        for (size_t idx = 0; idx < c.k.size(); ++idx) {
            nlohmann::json e;
            e["L"] = (c.t == 1) ? nlohmann::json(nullptr)
                               : nlohmann::json(r.grid.distortion_nodes[idx]);
            e["k"] = c.k[idx] ? nlohmann::json(*c.k[idx]) : nlohmann::json(nullptr);
            e["crossings"] = c.crossings[idx];
            entries.push_back(std::move(e));
        }
        jc["entries"] = std::move(entries);
        curves.push_back(std::move(jc));
    }
    j["thresholds"] = std::move(curves);
    j["diagnostics"]["distortion_clamps"] = r.diagnostics.distortion_clamps;
    j["diagnostics"]["max_interp_residual"] = r.diagnostics.max_interp_residual;
    j["diagnostics"]["nonmonotone_margins"] = r.diagnostics.nonmonotone_margins;
    return j;
}

namespace {

nlohmann::json entry_to_json(const CheckEntry& e) {
    nlohmann::json j;
    j["name"] = e.name;
    j["status"] = to_string(e.status);
    j["worst"] = e.worst;
    j["tol"] = e.tol;
    j["witness"]["t"] = e.witness.t;
    j["witness"]["theta_hat_prev"] = e.witness.theta_hat_prev;
    j["witness"]["distortion_prev"] = e.witness.distortion_prev;
    j["witness"]["theta_hat"] = e.witness.theta_hat;
    j["witness"]["theta_true"] = e.witness.theta_true;
    if (!e.note.empty()) j["note"] = e.note;
    return j;
}

} // namespace

nlohmann::json ic_report_to_json(const ICReport& report, const std::string& cfg_hash) {
    nlohmann::json j;
    j["version"] = kToolVersion;
    j["config_hash"] = cfg_hash;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : report.entries) arr.push_back(entry_to_json(e));
    j["checks"] = std::move(arr);
    j["any_fail"] = report.any_fail();
    return j;
}

nlohmann::json sim_summary_to_json(const SimSummary& s, const std::string& cfg_hash) {
    nlohmann::json j;
    j["version"] = kToolVersion;
    j["config_hash"] = cfg_hash;
    j["n_paths"] = s.n_paths;
    j["seed"] = s.seed;
    j["mean_revenue"] = s.mean_revenue;
    j["se_revenue"] = s.se_revenue;
    j["mean_buyer_payoff"] = s.mean_buyer_payoff;
    j["min_buyer_payoff"] = s.min_buyer_payoff;
    j["sale_counts"] = s.sale_counts;
    return j;
}

std::string transcripts_csv_header(const std::string& meta) {
    return meta + "path,sale_period,price,buyer_payoff,seller_revenue,types\n";
}

std::string transcript_to_csv_row(const Transcript& t) {
    std::ostringstream os;
    os << t.path_index << ',' << t.sale_period << ',' << format_double(t.price) << ','
       << format_double(t.buyer_payoff) << ',' << format_double(t.seller_revenue) << ',';
    for (size_t i = 0; i < t.types.size(); ++i) {
        if (i) os << ';';
        os << format_double(t.types[i]);
    }
    os << '\n';
    return os.str();
}

std::string sweep_to_csv(const SweepResult& s, const std::string& meta) {
    std::ostringstream os;
    os << meta << "value,revenue,k1";
    const size_t T = s.points.empty() ? 0 : s.points[0].sale_by_t.size();
    for (size_t t = 1; t <= T; ++t) os << ",p_sale_by_" << t;
    os << '\n';
    for (const auto& p : s.points) {
        os << format_double(p.value) << ',' << format_double(p.revenue) << ','
           << (p.k1 ? format_double(*p.k1) : std::string());
        for (double v : p.sale_by_t) os << ',' << format_double(v);
        os << '\n';
    }
    return os.str();
}

std::string sweep_plot_data(const SweepResult& s, const std::string& metric,
                            const std::string& meta) {
    std::ostringstream os;
    os << meta;
    for (const auto& p : s.points) {
        double v = 0.0;
        if (metric == "revenue")
            v = p.revenue;
        else if (metric == "k1")
            v = p.k1.value_or(std::numeric_limits<double>::quiet_NaN());
        else if (metric == "p_sale_by_1")
            v = p.sale_by_t.empty() ? 0.0 : p.sale_by_t[0];
        else
            throw std::invalid_argument("metric: expected revenue, k1, or p_sale_by_1");
        os << format_double(p.value) << ' ' << format_double(v) << '\n';
    }
    return os.str();
}

nlohmann::json sweep_to_json(const SweepResult& s, const std::string& cfg_hash) {
    nlohmann::json j;
    j["version"] = kToolVersion;
    j["config_hash"] = cfg_hash;
    j["axis"] = s.axis;
    j["revenue_monotone"] = s.revenue_monotone;
    j["early_sale_monotone"] = s.early_sale_monotone;
    if (!s.note.empty()) j["note"] = s.note;
    nlohmann::json pts = nlohmann::json::array();
    for (const auto& p : s.points) {
        nlohmann::json jp;
        jp["value"] = p.value;
        jp["revenue"] = p.revenue;
        jp["k1"] = p.k1 ? nlohmann::json(*p.k1) : nlohmann::json(nullptr);
        jp["sale_by_t"] = p.sale_by_t;
        jp["sale_dist"] = p.sale_dist;
        pts.push_back(std::move(jp));
    }
    j["points"] = std::move(pts);
    return j;
}

nlohmann::json myopic_report_to_json(const MyopicReport& m, const std::string& cfg_hash) {
    nlohmann::json j;
    j["version"] = kToolVersion;
    j["config_hash"] = cfg_hash;
    j["pass"] = m.pass;
    j["n_checked"] = m.n_checked;
    j["n_premise_failed"] = m.n_premise_failed;
    j["worst_margin"] = m.worst_margin;
    j["worst"]["t"] = m.worst.t;
    j["worst"]["theta"] = m.worst.theta;
    j["worst"]["distortion"] = m.worst.distortion;
    nlohmann::json viol = nlohmann::json::array();
    for (const auto& v : m.violations) {
        nlohmann::json jv;
        jv["t"] = v.t;
        jv["theta"] = v.theta;
        jv["distortion"] = v.distortion;
        jv["one_step"] = v.one_step;
        jv["two_step"] = v.two_step;
        viol.push_back(std::move(jv));
    }
    j["violations"] = std::move(viol);
    return j;
}

} // namespace selltime
