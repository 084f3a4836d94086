#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "selltime/ic.hpp"
#include "selltime/revenue.hpp"
#include "selltime/solver.hpp"

namespace selltime {

inline constexpr const char* kToolVersion = "0.1.0";

// Shortest round-trip decimal representation (so CSV consumers recover the
// exact double).
std::string format_double(double v);

std::uint64_t fnv1a64(const std::string& s);

// --- run configuration -------------------------------------------------------

struct RunConfig {
    std::string kernel_name = "shrinking_uniform";
    std::map<std::string, double> kernel_params;
    SolveConfig solve;

    bool check_integral_monotonicity = true;
    bool check_corollary2 = true;
    bool check_two_period = true;
    bool check_best_response = false;
    bool check_expost_ir = true;
    bool check_myopic = false;
    SamplePlan plan;
    int best_response_types = 40;

    std::uint64_t sim_paths = 100000;
    std::uint64_t seed = 12345;

    std::string sweep_axis = "delta";
    std::vector<double> sweep_values;

    std::string out_dir = "out";
    bool write_csv = true;
    bool write_json = true;
};

nlohmann::json run_config_to_json(const RunConfig& c);
RunConfig run_config_from_json(const nlohmann::json& j);

// Hash of the canonical JSON form, embedded in every output file.
std::string config_hash(const RunConfig& c);

// --- serializers ---------------------------------------------------------------

// Comment line carrying the tool version and config hash, prepended to
// every text output.
std::string csv_meta_line(const std::string& cfg_hash);

// One row per grid node: t,theta,L,psi,M,q,V.
std::string tables_to_csv(const SolveResult& r, const std::string& meta = {});

nlohmann::json thresholds_to_json(const SolveResult& r, const std::string& cfg_hash);

nlohmann::json ic_report_to_json(const ICReport& report, const std::string& cfg_hash);

nlohmann::json sim_summary_to_json(const SimSummary& s, const std::string& cfg_hash);

std::string transcripts_csv_header(const std::string& meta = {});
std::string transcript_to_csv_row(const Transcript& t);

std::string sweep_to_csv(const SweepResult& s, const std::string& meta = {});
// Two-column plain-text plot data (axis value, metric).
std::string sweep_plot_data(const SweepResult& s, const std::string& metric,
                            const std::string& meta = {});
nlohmann::json sweep_to_json(const SweepResult& s, const std::string& cfg_hash);

nlohmann::json myopic_report_to_json(const MyopicReport& m, const std::string& cfg_hash);

} // namespace selltime
