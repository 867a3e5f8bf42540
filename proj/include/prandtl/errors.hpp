#pragma once

#include <stdexcept>
#include <string>

namespace prandtl {

enum class Errc {
    precondition,
    infeasible_profile,
    singular_coefficient,
    path_through_singularity,
    truncation_too_small,
    no_root_in_region,
    newton_diverged,
    jump_mismatch,
    fit_failed,
    stiffness_overflow,
    far_field_degenerate,
    wrong_branch,
    branch_crossing,
    ray_mismatch,
    critical_layer_hit,
    under_resolved,
    cfl_violation,
    fit_unstable,
    trace_violation,
    growth_overflow,
    config_invalid,
    missing_golden,
};

inline const char* errc_name(Errc c)
{
    switch (c) {
    case Errc::precondition: return "PreconditionViolation";
    case Errc::infeasible_profile: return "InfeasibleProfile";
    case Errc::singular_coefficient: return "SingularCoefficient";
    case Errc::path_through_singularity: return "PathThroughSingularity";
    case Errc::truncation_too_small: return "TruncationTooSmall";
    case Errc::no_root_in_region: return "NoRootInRegion";
    case Errc::newton_diverged: return "NewtonDiverged";
    case Errc::jump_mismatch: return "JumpMismatch";
    case Errc::fit_failed: return "FitFailed";
    case Errc::stiffness_overflow: return "StiffnessOverflow";
    case Errc::far_field_degenerate: return "FarFieldDegenerate";
    case Errc::wrong_branch: return "WrongBranch";
    case Errc::branch_crossing: return "BranchCrossing";
    case Errc::ray_mismatch: return "RayMismatch";
    case Errc::critical_layer_hit: return "CriticalLayerHit";
    case Errc::under_resolved: return "UnderResolved";
    case Errc::cfl_violation: return "CFLViolation";
    case Errc::fit_unstable: return "FitUnstable";
    case Errc::trace_violation: return "TraceViolation";
    case Errc::growth_overflow: return "GrowthOverflow";
    case Errc::config_invalid: return "ConfigInvalid";
    case Errc::missing_golden: return "MissingGolden";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code)
    {
    }

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

inline void require(bool cond, const std::string& what)
{
    if (!cond)
        throw Error(Errc::precondition, what);
}

} // namespace prandtl
