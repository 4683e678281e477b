// Command-line front end.  Reads one JSON job document (from a file argument
// or stdin), applies flag overrides, runs it, and prints the report to
// stdout.  Exit code 0 on success, 2 for malformed jobs, 3 for numerical
// failures; the same diagnostic appears in the report's "error" field.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fockbs/jobs.hpp"
#include "fockbs/version.hpp"

namespace {

std::string read_all(std::istream& in) {
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conditional Fock-state engineering at beam splitter arrays"};
    app.set_version_flag("--version", std::string("fockbs ") + fockbs::version_string);

    std::string job_path = "-";
    app.add_option("job", job_path, "job document (JSON file path; '-' or omitted reads stdin)");

    // Parsed into plain locals; only options the user actually passed are
    // transferred into JobOptions, so absent flags leave the job document's
    // own values (and the environment default) in force.
    int cutoff = 0;
    std::uint64_t seed = 0;
    std::int64_t shots = 0;
    double tolerance = 0.0;
    fockbs::JobOptions opts;
    std::string csv_path;
    app.add_option("--cutoff", cutoff, "highest retained photon number (overrides the job document)");
    app.add_option("--seed", seed, "sampler seed (overrides the job document)");
    app.add_option("--shots", shots, "sampler shot count (overrides the job document)");
    app.add_option("--tolerance", tolerance, "reporting tolerance (overrides the job document)");
    app.add_flag("--alt-stage-amplitudes", opts.alt_stage_amplitudes,
                 "use the alternate stage-amplitude scaling in measurement schemes "
                 "(skips scheme validation; the report carries the achieved fidelity)");
    app.add_option("--csv", csv_path, "also write the report's tabular section to this CSV file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // --help/--version land here too and exit 0; real flag errors share
        // the malformed-input code with schema violations.
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (app.count("--cutoff") > 0) opts.cutoff = cutoff;
    if (app.count("--seed") > 0) opts.seed = seed;
    if (app.count("--shots") > 0) opts.shots = shots;
    if (app.count("--tolerance") > 0) opts.tolerance = tolerance;
    if (const char* env = std::getenv("FOCKBS_CUTOFF")) {
        char* end = nullptr;
        long value = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && value > 0) {
            opts.env_cutoff = static_cast<int>(value);
        } else {
            std::cerr << "warning: ignoring FOCKBS_CUTOFF=" << env
                      << " (expected a positive integer)\n";
        }
    }

    std::string text;
    if (job_path == "-") {
        text = read_all(std::cin);
    } else {
        std::ifstream file(job_path);
        if (!file) {
            std::cerr << "error: cannot open " << job_path << "\n";
            return 2;
        }
        text = read_all(file);
    }

    fockbs::Json job = fockbs::Json::parse(text, nullptr, false);
    if (job.is_discarded()) {
        fockbs::Json report;
        report["version"] = fockbs::version_string;
        report["error"] = "job schema: input is not valid JSON";
        std::cout << fockbs::dump_report(report);
        return 2;
    }

    fockbs::JobResult result = fockbs::run_job(job, opts);
    std::cout << fockbs::dump_report(result.report);

    if (!csv_path.empty() && result.exit_code == 0) {
        std::ofstream csv(csv_path);
        if (!csv) {
            std::cerr << "error: cannot write " << csv_path << "\n";
            return 2;
        }
        csv << fockbs::report_csv(result.report);
    }
    return result.exit_code;
}
