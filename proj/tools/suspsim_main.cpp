// Copyright 2026 The suspsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// suspsim: simulation, estimation, and control toolkit for cable-suspended
// aerial platforms.
//
//   suspsim simulate <scenario-file> [--out PREFIX] [--seed N]
//   suspsim compare <scenario-file> [--out PREFIX] [--seed N]
//   suspsim gains <scenario-file>
//   suspsim estimate-replay <scenario-file> <measurements.csv> [--out PREFIX]
//
// Exit codes: 0 success, 1 invalid scenario, 2 numerical failure,
// 3 I/O failure.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "susp/control.hpp"
#include "susp/dynamics.hpp"
#include "susp/estimation.hpp"
#include "susp/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitScenario = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitIo = 3;

std::string ReadFileOrThrow(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw susp::IoError("cannot read file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int RunSimulate(const std::string& scenarioPath, const std::string& outPrefix,
                bool seedSet, std::uint64_t seed) {
  susp::Scenario s = susp::LoadScenarioFile(scenarioPath);
  if (seedSet) s.seed = seed;
  const susp::RunResult r = susp::RunScenario(s);
  std::cout << "scenario: " << scenarioPath << "\n"
            << "platform: " << susp::ToString(s.platform)
            << "  controller: " << susp::ToString(s.controller)
            << "  estimator: " << susp::ToString(s.estimator)
            << "  seed: " << s.seed << "\n"
            << "samples: " << r.log.rows.size() << " (dt "
            << s.dtCtrl << " s, horizon " << s.duration << " s)\n"
            << susp::FormatMetrics(r.metrics);
  if (!outPrefix.empty()) {
    susp::ExportLog(r, s, outPrefix);
    std::cout << "wrote " << outPrefix << ".csv and " << outPrefix
              << "_summary.txt\n";
  }
  return kExitOk;
}

int RunCompare(const std::string& scenarioPath, const std::string& outPrefix,
               bool seedSet, std::uint64_t seed) {
  susp::Scenario s = susp::LoadScenarioFile(scenarioPath);
  if (seedSet) s.seed = seed;
  const susp::PlatformComparison c = susp::ComparePlatforms(s);
  std::cout << susp::FormatComparison(c);
  if (!outPrefix.empty()) {
    susp::ExportComparison(c, s, outPrefix);
    std::cout << "wrote " << outPrefix << "_table.txt and " << outPrefix
              << "_fig_{joints,energy,task,wrench}.csv\n";
  }
  for (const susp::ComparisonEntry& e : c.entries) {
    if (e.ok) return kExitOk;  // at least one platform completed
  }
  return kExitNumerical;
}

int RunGains(const std::string& scenarioPath) {
  const susp::Scenario s = susp::LoadScenarioFile(scenarioPath);
  const susp::PlatformConfig cfg = susp::BuiltinPlatform(s.platform);
  const susp::LinearizedDynamics lin = susp::Linearize(
      susp::Vec10::Zero(), susp::Vec6::Zero(), s.params, cfg.Bsel);
  const susp::MatXd Q = susp::MatXd(s.lqrQDiag.asDiagonal());
  const susp::MatXd R =
      s.lqrRScale * susp::MatXd::Identity(cfg.Bsel.cols(), cfg.Bsel.cols());
  const susp::LqrDesign design = susp::SolveCare(lin.A, lin.B, Q, R);

  const int ctrb = susp::CtrbRank(lin.A, lin.B);
  const susp::MatXd H =
      susp::MeasurementJacobian(susp::Vec10::Zero(), s.params);
  const int obsv = susp::CtrbRank(susp::MatXd(lin.A.transpose()),
                                  susp::MatXd(H.transpose()));

  std::cout << "platform: " << susp::ToString(s.platform) << " ("
            << cfg.nMotors << " motors, " << lin.B.cols() << " wrench inputs)\n"
            << "controllability rank: " << ctrb << " / 10\n"
            << "observability rank:   " << obsv << " / 10\n";
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "care residual: %.3e   closed-loop abscissa: %.6f   "
                "newton iterations: %d\n",
                design.residual, design.abscissa, design.newtonIterations);
  std::cout << buf << "gain K (" << design.K.rows() << " x "
            << design.K.cols() << "):\n";
  for (Eigen::Index i = 0; i < design.K.rows(); ++i) {
    for (Eigen::Index j = 0; j < design.K.cols(); ++j) {
      std::snprintf(buf, sizeof buf, " % 12.6f", design.K(i, j));
      std::cout << buf;
    }
    std::cout << "\n";
  }
  return kExitOk;
}

int RunReplay(const std::string& scenarioPath, const std::string& measPath,
              const std::string& outPrefix) {
  const susp::Scenario s = susp::LoadScenarioFile(scenarioPath);
  const auto packets = susp::ParseMeasurementCsv(ReadFileOrThrow(measPath));
  if (packets.empty()) {
    throw susp::ScenarioError("no measurement packets in " + measPath);
  }
  const susp::SimLog log = susp::ReplayEstimate(s, packets);
  const susp::VecXd& last = log.rows.back();
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "replayed %zu packets over [%.6g, %.6g] s; final trace(P) = "
                "%.6g\n",
                packets.size(), log.rows.front()[0], last[0], last[11]);
  std::cout << buf;
  if (!outPrefix.empty()) {
    susp::WriteTextFile(outPrefix + ".csv", susp::RenderCsv(log));
    std::cout << "wrote " << outPrefix << ".csv\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "suspsim: cable-suspended aerial platform simulation, estimation, and "
      "control"};
  app.require_subcommand(1);

  std::string scenarioPath;
  std::string measPath;
  std::string outPrefix;
  std::uint64_t seed = 0;

  CLI::App* simulate =
      app.add_subcommand("simulate", "run one scenario and print metrics");
  simulate->add_option("scenario", scenarioPath, "scenario file")->required();
  simulate->add_option("--out", outPrefix, "export CSV/summary with prefix");
  CLI::Option* simSeed =
      simulate->add_option("--seed", seed, "override the scenario seed");

  CLI::App* compare = app.add_subcommand(
      "compare", "run the scenario on all three platforms and tabulate");
  compare->add_option("scenario", scenarioPath, "scenario file")->required();
  compare->add_option("--out", outPrefix, "export table and figure CSVs");
  CLI::Option* cmpSeed =
      compare->add_option("--seed", seed, "override the scenario seed");

  CLI::App* gains = app.add_subcommand(
      "gains", "print the joint damper design for the scenario's platform");
  gains->add_option("scenario", scenarioPath, "scenario file")->required();

  CLI::App* replay = app.add_subcommand(
      "estimate-replay", "run the filter over recorded measurements");
  replay->add_option("scenario", scenarioPath, "scenario file")->required();
  replay->add_option("measurements", measPath, "measurement CSV")->required();
  replay->add_option("--out", outPrefix, "export the estimate trajectory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      return RunSimulate(scenarioPath, outPrefix, simSeed->count() > 0, seed);
    }
    if (compare->parsed()) {
      return RunCompare(scenarioPath, outPrefix, cmpSeed->count() > 0, seed);
    }
    if (gains->parsed()) {
      return RunGains(scenarioPath);
    }
    if (replay->parsed()) {
      return RunReplay(scenarioPath, measPath, outPrefix);
    }
  } catch (const susp::ScenarioError& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitScenario;
  } catch (const std::invalid_argument& e) {
    std::cerr << "scenario error: " << e.what() << "\n";
    return kExitScenario;
  } catch (const susp::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const susp::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}
