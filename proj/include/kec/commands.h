/*
 * Copyright (C) 2026 The kec authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef KEC_COMMANDS_H
#define KEC_COMMANDS_H

#include "kec/calib.h"
#include "kec/config.h"
#include "kec/macro.h"
#include "kec/sgkinetic.h"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace kec
{

std::string version_string();

/// Where and how a subcommand runs.
struct RunContext {
    std::filesystem::path out_dir = ".";
    bool assert_mode              = false;
    unsigned jobs                 = 1;
};

/// Accumulates the --assert checks of a subcommand.
struct CheckList {
    std::vector<std::string> failures;

    void require(bool ok, const std::string& what);
    bool passed() const
    {
        return failures.empty();
    }
};

/// "# kec <version> config_sha256=<hash>" followed by a newline.
std::string output_header(const Config& cfg);

struct EquilibriumCase {
    double delta      = 0.0;
    double l1_rel     = 0.0;
    std::optional<double> closed_form_err; ///< max pointwise error over the peak value
    std::optional<double> tail_slope;
    std::optional<double> expected_slope;
    double seconds = 0.0;
};
std::vector<EquilibriumCase> cmd_equilibrium(const Config& cfg, const RunContext& ctx, CheckList& checks);

struct KineticReport {
    PerCompartment<MeanVariance> final_rho{};
    PerCompartment<MeanVariance> final_mean{};
    PerCompartment<double> damping{}; ///< E_z of int (x - x_T)^2 f dx
    double peak_infected      = 0.0;
    double peak_time          = 0.0;
    double mass_drift         = 0.0;
    std::size_t clip_count    = 0;
    double seconds            = 0.0;
};
KineticReport cmd_kinetic(const Config& cfg, const RunContext& ctx, CheckList& checks);

ConvergenceStudy cmd_sg_convergence(const Config& cfg, const RunContext& ctx, CheckList& checks);

MacroEnsemble cmd_macro(const Config& cfg, const RunContext& ctx, CheckList& checks);

struct ClosureRow {
    double tau     = 0.0;
    double sup_abs = 0.0;
    double sup_rel = 0.0; ///< sup_abs over the peak of the macroscopic E[rho_I]
};
std::vector<ClosureRow> cmd_closure_check(const Config& cfg, const RunContext& ctx, CheckList& checks);

enum class CalibStage
{
    Pre,
    Targets,
    Retro,
};

struct CalibrateReport {
    std::vector<FitResult> fits;
    std::vector<std::pair<std::string, std::vector<TargetWindow>>> targets; ///< (label, windows)
    std::vector<RetroRow> retro;
};
CalibrateReport cmd_calibrate(const Config& cfg, const RunContext& ctx, CalibStage stage, CheckList& checks,
                              const std::string& data_override = "");

/// Parses the command line, runs a subcommand and maps failures to exit codes.
int cli_main(int argc, char** argv);

} // namespace kec

#endif // KEC_COMMANDS_H
