// abba: experiment runner for the AB/BA-GMRES reconstruction library.

#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "abba/experiment.hpp"

namespace {

int runPhantom(const std::string& name, const std::string& outPath, bool sinogram, std::string format,
               std::uint64_t seed, std::size_t size) {
  using namespace abba;
  if (format.empty()) format = std::filesystem::path(outPath).extension() == ".csv" ? "csv" : "pgm";
  if (format != "pgm" && format != "csv") {
    std::cerr << "phantom: --format must be pgm or csv\n";
    return 2;
  }
  Vector values;
  std::size_t width = 0, height = 0;
  try {
    if (name == "shepp-logan") {
      if (sinogram) {
        std::cerr << "phantom: --sinogram needs a test problem name (tp1-like, tp2, tp3-desk)\n";
        return 2;
      }
      const ImageGrid g{size, size, 1.0};
      values = sheppLogan(g);
      width = height = size;
    } else {
      CtProblemSpec spec = testProblemSpec(parseTestProblem(name), false, seed);
      if (sinogram) {
        const CtProblem p = buildProblem(spec);
        values = p.bNoisy;
        width = p.geometry.detCount;
        height = p.geometry.angles.size();
      } else {
        const ImageGrid g{spec.size, spec.size, spec.pixelSize};
        values = sheppLogan(g);
        width = height = spec.size;
      }
    }
  } catch (const ConfigurationError& e) {
    std::cerr << "phantom: " << e.what() << '\n';
    return 2;
  }
  try {
    if (format == "csv") writeCsvMatrix(outPath, values, width, height);
    else writePgm16(outPath, values, width, height);
  } catch (const std::exception& e) {
    std::cerr << "phantom: " << e.what() << '\n';
    return 1;
  }
  std::cout << "wrote " << width << "x" << height << " " << (sinogram ? "sinogram" : "phantom") << " to " << outPath
            << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"abba: hybrid AB/BA-GMRES experiments for CT with unmatched projector pairs"};
  app.require_subcommand(1);

  std::string configPath, outDir;
  std::uint64_t seed = 0;
  auto* run = app.add_subcommand("run", "run every solver of an experiment config");
  run->add_option("config", configPath, "config file")->required();
  auto* outOpt = run->add_option("--out", outDir, std::string("output directory (default: config 'output', then $") +
                                                      abba::kOutDirEnv + ", then ./abba-out)");
  auto* seedOpt = run->add_option("--seed", seed, "override the config seed");

  std::string manifestA, manifestB;
  auto* compare = app.add_subcommand("compare", "summarize two run manifests side by side");
  compare->add_option("manifestA", manifestA)->required();
  compare->add_option("manifestB", manifestB)->required();

  std::string phantomName, phantomOut, format;
  bool sinogram = false;
  std::uint64_t phantomSeed = 0;
  std::size_t phantomSize = 128;
  auto* phantom = app.add_subcommand("phantom", "export a phantom or noisy sinogram");
  phantom->add_option("name", phantomName, "tp1-like, tp2, tp3-desk or shepp-logan")->required();
  phantom->add_option("--out", phantomOut, "output file")->required();
  phantom->add_flag("--sinogram", sinogram, "export the noisy sinogram instead of the phantom");
  phantom->add_option("--format", format, "pgm or csv (default: from the file extension)");
  phantom->add_option("--seed", phantomSeed, "noise seed for --sinogram");
  phantom->add_option("--size", phantomSize, "grid size for shepp-logan")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (run->parsed()) {
    abba::ExperimentConfig cfg;
    try {
      cfg = abba::loadExperimentConfig(configPath);
    } catch (const abba::ConfigurationError& e) {
      std::cerr << e.what() << '\n';
      return 2;
    }
    abba::ExperimentOptions opt;
    if (outOpt->count()) opt.outDir = outDir;
    if (seedOpt->count()) opt.seed = seed;
    return abba::runExperiment(cfg, opt, std::cout, std::cerr);
  }
  if (compare->parsed()) return abba::compareRuns(manifestA, manifestB, std::cout, std::cerr);
  return runPhantom(phantomName, phantomOut, sinogram, format, phantomSeed, phantomSize);
}
