// ebpca command-line tool: simulate | fit | diagnose.

#include "ebpca/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

int exit_code(ebpca::ErrorKind kind) {
  using ebpca::ErrorKind;
  switch (kind) {
    case ErrorKind::kValidation:
    case ErrorKind::kDimension:
    case ErrorKind::kIo:
    case ErrorKind::kConfig:
      return 2;
    default:
      return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical Bayes PCA"};
  app.require_subcommand(1);

  auto* sim = app.add_subcommand("simulate", "run a simulation study from a key=value config");
  std::string config_path;
  sim->add_option("--config", config_path, "config file")->required();

  auto* fit = app.add_subcommand("fit", "denoise the top-k PCs of a data matrix");
  ebpca::FitRequest fr;
  bool fit_no_std = false;
  fit->add_option("--input", fr.input, "matrix file (rows = samples)")->required();
  fit->add_option("--k", fr.k, "number of PCs")->required();
  fit->add_option("--iters", fr.iters, "AMP iterations")->required();
  fit->add_option("--format", fr.format, "csv | bin (default: detect)")
      ->check(CLI::IsMember({"csv", "bin", "auto"}));
  fit->add_flag("--no-standardize-rows", fit_no_std, "skip centering/scaling each row");
  fit->add_option("--out", fr.out, "output directory")->required();

  auto* diag = app.add_subcommand("diagnose", "singular value diagnostics against the noise bulk");
  ebpca::DiagnoseRequest dr;
  bool diag_no_std = false;
  diag->add_option("--input", dr.input, "matrix file (rows = samples)")->required();
  diag->add_option("--k", dr.k, "number of PCs removed when estimating the noise level")
      ->required();
  diag->add_option("--format", dr.format, "csv | bin (default: detect)")
      ->check(CLI::IsMember({"csv", "bin", "auto"}));
  diag->add_flag("--no-standardize-rows", diag_no_std, "skip centering/scaling each row");
  diag->add_option("--out", dr.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) {
      const ebpca::RunConfig cfg = ebpca::RunConfig::load(config_path);
      const auto out = ebpca::run_simulation(cfg, ebpca::worker_count(cfg.seeds));
      ebpca::write_simulation(out, cfg.out);
      std::size_t warnings = 0;
      for (const auto& s : out.seeds) warnings += s.warnings.size();
      std::cout << "simulate: " << cfg.seeds << " seed(s), " << cfg.methods.size()
                << " method(s), " << warnings << " warning(s) -> " << cfg.out << "\n";
    } else if (*fit) {
      fr.standardize = !fit_no_std;
      const auto r = ebpca::run_fit(fr);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << "fit: kept " << r.k() << " of " << fr.k << " component(s), tau_hat "
                << r.tau_hat << " -> " << fr.out << "\n";
    } else if (*diag) {
      dr.standardize = !diag_no_std;
      const auto dg = ebpca::run_diagnose(dr);
      std::cout << "diagnose: " << dg.outliers << " outlier(s) above " << dg.threshold
                << ", bulk KS " << dg.ks_bulk << " -> " << dr.out << "\n";
    }
  } catch (const ebpca::Error& e) {
    std::cerr << "error (" << ebpca::to_string(e.kind()) << "): " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
