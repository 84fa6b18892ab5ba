#pragma once

#include <stdexcept>
#include <string>

namespace cubic {

enum class Err {
    AmbiguousPeriod,
    NoConvergence,
    WrongPeriod,
    NotInBasin,
    OutsideDomain,
    OnCriticalOrbitRelation,
    DegenerateFiber,
    BranchJump,
    StepUnderflow,
    NoTrapFound,
    ResolutionExhausted,
    RayBifurcates,
    OutsideSpStar,
    ParabolicSuspect,
    GraphInvalid,
    ArrangementAmbiguous,
    SelectionFailed,
    OnGraph,
    NotHyperbolicABC,
    NotTypeD,
    ContinuationStall,
    InvalidArgument,
};

const char* err_name(Err e);

class Error : public std::runtime_error {
public:
    Error(Err code, const std::string& what)
        : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}
    Err code() const noexcept { return code_; }

private:
    Err code_;
};

}  // namespace cubic
