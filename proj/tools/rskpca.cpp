// rskpca: experiment runner and model fit/project front end.
//
//   rskpca run <spec.json> [--seed S] [--out-dir DIR] [--threads T]
//   rskpca bounds --dataset PATH --sigma S --ell-min A --ell-max B --step H
//   rskpca fit --dataset PATH --method shadow --sigma S --model OUT
//   rskpca project --model IN --dataset PATH --output EMB.csv
//
// Exit codes: 0 success, 1 bound violation, 2 input error, 3 numerical failure.

#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rskpca/experiments.hpp"
#include "rskpca/rskpca.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitViolation = 1;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

struct DatasetFlags {
  std::string path;
  std::string format;
  std::string label_column;
  std::string name;
  bool minmax = false;

  void attach(CLI::App* app) {
    app->add_option("--dataset", path, "Dataset file (libsvm sparse or CSV)")->required();
    app->add_option("--format", format, "sparse or csv; default by extension");
    app->add_option("--label-column", label_column, "CSV label column, by name or index");
    app->add_option("--name", name, "Dataset name (selects a default sigma)");
    app->add_flag("--minmax", minmax, "Scale every feature to [0, 1]");
  }

  rskpca::DatasetSpec spec() const {
    rskpca::DatasetSpec s;
    s.path = path;
    s.format = format;
    if (!label_column.empty()) s.label_column = label_column;
    s.name = name;
    s.minmax = minmax;
    return s;
  }
};

void print_written(const std::vector<std::filesystem::path>& files) {
  for (const auto& f : files) std::cout << f.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reduced-set kernel PCA toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  std::optional<int> threads;
  app.add_option("--seed", seed, "Random seed (overrides the spec)");
  app.add_option("--out-dir", out_dir, "Directory for report files");
  app.add_option("--threads", threads, "Worker threads for untimed repetitions");

  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON spec");
  std::string spec_path;
  run->add_option("spec", spec_path, "Experiment spec (JSON)")->required();

  auto* bounds = app.add_subcommand("bounds", "Check the approximation bounds over an ell sweep");
  DatasetFlags bounds_data;
  bounds_data.attach(bounds);
  double bounds_sigma = 0.0;
  double ell_min = 3.0, ell_max = 5.0, ell_step = 0.1;
  std::string bounds_kernel = "gaussian";
  rskpca::Index bounds_dim = 1;
  bounds->add_option("--sigma", bounds_sigma, "Kernel bandwidth")->required();
  bounds->add_option("--kernel", bounds_kernel, "gaussian or laplacian");
  bounds->add_option("--ell-min", ell_min, "First ell");
  bounds->add_option("--ell-max", ell_max, "Last ell");
  bounds->add_option("--step", ell_step, "ell increment");
  bounds->add_option("--dim", bounds_dim, "Subspace dimension D for the projection bound");

  auto* fit = app.add_subcommand("fit", "Fit a model and save it");
  DatasetFlags fit_data;
  fit_data.attach(fit);
  std::string method = "shadow";
  std::string fit_kernel = "gaussian";
  std::optional<double> fit_sigma;
  double fit_ell = 4.0;
  rskpca::Index fit_m = 0;
  rskpca::Index fit_rank = 5;
  std::string model_out;
  fit->add_option("--method", method, "full, shadow, kmeans, paring, herding, subsampled, nystrom, wnystrom");
  fit->add_option("--kernel", fit_kernel, "gaussian or laplacian");
  fit->add_option("--sigma", fit_sigma, "Kernel bandwidth (default depends on --name)");
  fit->add_option("--ell", fit_ell, "Shadow parameter");
  fit->add_option("--m", fit_m, "Center or landmark count for non-shadow methods");
  fit->add_option("--rank", fit_rank, "Number of components");
  fit->add_option("--model", model_out, "Output model file")->required();

  auto* proj = app.add_subcommand("project", "Embed a dataset with a saved model");
  DatasetFlags proj_data;
  proj_data.attach(proj);
  std::string model_in;
  std::string embedding_out;
  proj->add_option("--model", model_in, "Model file")->required();
  proj->add_option("--output", embedding_out, "Embedding CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*run) {
      rskpca::ExperimentSpec spec = rskpca::load_spec(spec_path);
      if (seed) spec.seed = *seed;
      if (threads) {
        rskpca::detail::require(*threads >= 1, "--threads must be at least 1");
        spec.threads = *threads;
      }
      const rskpca::DataSet ds = rskpca::load_dataset(spec.dataset, spec.seed);
      const rskpca::ExperimentResult result = rskpca::run_experiment(spec, ds);
      print_written(rskpca::emit_report(result, out_dir));
      if (result.any_violation()) {
        std::cerr << "rskpca: bound violated\n";
        return kExitViolation;
      }
      return kExitOk;
    }

    if (*bounds) {
      rskpca::ExperimentSpec spec;
      spec.experiment = rskpca::ExperimentKind::Bounds;
      spec.dataset = bounds_data.spec();
      spec.family = rskpca::parse_kernel_family(bounds_kernel);
      spec.sigma = bounds_sigma;
      spec.ell_min = ell_min;
      spec.ell_max = ell_max;
      spec.ell_step = ell_step;
      spec.bounds_dim = bounds_dim;
      if (threads) spec.threads = *threads;
      const rskpca::DataSet ds = rskpca::load_dataset(spec.dataset, seed.value_or(0));
      const rskpca::ExperimentResult result = rskpca::run_bounds_experiment(spec, ds);
      print_written(rskpca::emit_report(result, out_dir));
      if (result.any_violation()) {
        std::cerr << "rskpca: bound violated\n";
        return kExitViolation;
      }
      return kExitOk;
    }

    if (*fit) {
      const rskpca::DataSet ds = rskpca::load_dataset(fit_data.spec(), 0);
      std::optional<double> sigma = fit_sigma;
      if (!sigma) sigma = rskpca::default_sigma(ds.name);
      if (!sigma) throw rskpca::InputError("--sigma is required for dataset '" + ds.name + "'");
      const rskpca::KernelConfig cfg(rskpca::parse_kernel_family(fit_kernel), *sigma);
      rskpca::MethodRequest req;
      req.method = method;
      req.ell = fit_ell;
      req.m = fit_m;
      req.rank = fit_rank;
      req.seed = seed.value_or(0);
      if (method != "full" && method != "shadow" && fit_m <= 0) {
        throw rskpca::InputError("--m is required for method '" + method + "'");
      }
      const rskpca::Points none(0, ds.dim());
      const rskpca::MethodOutput out = rskpca::run_method(req, ds.points, none, cfg);
      std::ofstream file(model_out);
      if (!file) throw rskpca::InputError("cannot write '" + model_out + "'");
      rskpca::save_model(out.model, file);
      std::cout << "method " << method << " n " << ds.size() << " m " << out.m << " rank "
                << out.model.rank() << '\n';
      return kExitOk;
    }

    if (*proj) {
      std::ifstream file(model_in);
      if (!file) throw rskpca::InputError("cannot open model '" + model_in + "'");
      const rskpca::KpcaModel model = rskpca::load_model(file);
      const rskpca::DataSet ds = rskpca::load_dataset(proj_data.spec(), 0);
      const rskpca::Matrix emb = rskpca::project(model, ds.points);
      if (embedding_out.empty()) {
        for (rskpca::Index i = 0; i < emb.rows(); ++i) {
          for (rskpca::Index j = 0; j < emb.cols(); ++j) {
            std::cout << (j ? "," : "") << rskpca::detail::format_double(emb(i, j));
          }
          std::cout << '\n';
        }
      } else {
        rskpca::save_csv(emb, embedding_out, {});
      }
      return kExitOk;
    }
  } catch (const rskpca::InputError& e) {
    std::cerr << "rskpca: " << e.what() << '\n';
    return kExitInput;
  } catch (const rskpca::Error& e) {
    std::cerr << "rskpca: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "rskpca: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitOk;
}
