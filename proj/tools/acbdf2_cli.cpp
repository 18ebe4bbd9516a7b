#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "acbdf2/acbdf2.hpp"

namespace {

enum Exit { ok = 0, config_error = 2, solver_error = 3, constraint_abort = 4 };

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw acbdf2::ConfigError({{0, "cannot open config file '" + path + "'"}});
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

int cmd_run(const std::string& path, const std::vector<std::string>& sets, const std::optional<std::uint64_t>& seed,
            const std::string& out_dir) {
    std::vector<std::string> overrides = sets;
    if (seed) {
        overrides.push_back("time.seed=" + std::to_string(*seed));
        overrides.push_back("init.seed=" + std::to_string(*seed));
    }
    if (!out_dir.empty()) overrides.push_back("output.dir=" + out_dir);

    acbdf2::RunConfig cfg;
    try {
        cfg = acbdf2::parse_config(read_file(path), overrides);
    } catch (const acbdf2::ConfigError& e) {
        std::cerr << path << ": " << e.what() << '\n';
        return config_error;
    }

    try {
        const acbdf2::RunResult res = acbdf2::run(cfg);
        acbdf2::write_summary(std::cout, res.summary);
    } catch (const acbdf2::ConstraintViolation& e) {
        std::cerr << "aborted: " << e.what() << '\n';
        return constraint_abort;
    } catch (const acbdf2::SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return solver_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return solver_error;
    }
    return ok;
}

void write_convergence_csv(std::ostream& os, const std::vector<acbdf2::ConvergenceRow>& rows) {
    os << "N,tau_max,err_inf,order,num_ratio_violations\n" << std::setprecision(17);
    for (const auto& r : rows) {
        os << r.N << ',' << r.tau_max << ',' << r.err_inf << ',';
        if (r.order) os << *r.order;
        os << ',' << r.num_ratio_violations << '\n';
    }
}

int cmd_mms(const std::vector<std::size_t>& Ns, const std::vector<std::uint64_t>& seeds, std::size_t M,
            const std::string& source, const std::string& out_dir) {
    const acbdf2::MmsSource src =
        source == "grid" ? acbdf2::MmsSource::grid_consistent : acbdf2::MmsSource::continuous;
    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
    try {
        for (std::uint64_t seed : seeds) {
            const auto rows = acbdf2::convergence_table(Ns, seed, M, src);
            std::cout << "# seed " << seed << '\n';
            write_convergence_csv(std::cout, rows);
            if (!out_dir.empty()) {
                std::ofstream f(std::filesystem::path(out_dir) / ("convergence_seed" + std::to_string(seed) + ".csv"));
                write_convergence_csv(f, rows);
            }
        }
    } catch (const acbdf2::SolverError& e) {
        std::cerr << "solver failure: " << e.what() << '\n';
        return solver_error;
    }
    return ok;
}

int cmd_check_kernels(std::size_t N, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> ratio(0.05, acbdf2::kRatioLimitS0 - 1e-3);
    std::vector<double> steps{0.1};
    for (std::size_t k = 1; k < N; ++k) steps.push_back(steps.back() * ratio(gen));
    const acbdf2::TimeMesh mesh(steps);
    const double eta = acbdf2::choose_eta(std::max(1.0, mesh.max_ratio()));
    const acbdf2::ComplementaryKernels ck(mesh, eta);

    std::cout << "# eta = " << std::setprecision(17) << eta << '\n';
    std::cout << "n,j,b0,b1,d_j,Q_j,identity_residual\n";
    double worst = 0.0;
    for (std::size_t n = 1; n <= N; ++n) {
        const acbdf2::Bdf2Kernel b = acbdf2::bdf2_kernels(mesh, n);
        for (std::size_t j = 1; j <= n; ++j) {
            const double res = ck.identity_residual(n, j);
            worst = std::max(worst, res);
            std::cout << n << ',' << j << ',' << b.b0 << ',' << b.b1 << ',' << ck.d(n, n - j) << ',' << ck.q(n, j)
                      << ',' << res << '\n';
        }
    }
    std::cerr << "max identity residual " << worst << '\n';
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variable-step BDF2 solver for the Allen-Cahn equation"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run a configured simulation");
    std::string cfg_path, out_dir;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    run->add_option("config", cfg_path, "Config file (section.key = value)")->required();
    run->add_option("--set", sets, "Override a config key, e.g. --set time.tau=0.4");
    run->add_option("--seed", seed, "Sets both time.seed and init.seed");
    run->add_option("--out", out_dir, "Output directory (overrides output.dir)");

    auto* mms = app.add_subcommand("mms", "Convergence sweep on the manufactured problem");
    std::vector<std::size_t> Ns{10, 20, 40, 80};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::size_t M = 256;
    std::string source = "continuous", mms_out;
    mms->add_option("--N", Ns, "Step counts")->delimiter(',');
    mms->add_option("--seeds", seeds, "Random mesh seeds")->delimiter(',');
    mms->add_option("--M", M, "Grid resolution")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 14));
    mms->add_option("--source", source, "Manufactured source")->check(CLI::IsMember({"continuous", "grid"}));
    mms->add_option("--out", mms_out, "Directory for convergence_seed<S>.csv");

    auto* ck = app.add_subcommand("check-kernels", "Dump kernels and identity residuals on a random mesh");
    std::size_t ck_N = 12;
    std::uint64_t ck_seed = 1;
    ck->add_option("--N", ck_N, "Mesh size")->check(CLI::PositiveNumber);
    ck->add_option("--seed", ck_seed, "Mesh seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : config_error;
    }

    if (*run) return cmd_run(cfg_path, sets, seed, out_dir);
    if (*mms) return cmd_mms(Ns, seeds, M, source, mms_out);
    return cmd_check_kernels(ck_N, ck_seed);
}
