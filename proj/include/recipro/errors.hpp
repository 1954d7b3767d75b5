#pragma once

#include <stdexcept>
#include <string>

namespace recipro {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A time falls outside the range covered by a schedule or trajectory.
struct OutOfRangeError : Error {
    using Error::Error;
};

/// Schedule construction rejected (non-contiguous pieces, negative rates, ...).
struct InvalidScheduleError : Error {
    using Error::Error;
};

/// A propagated state stopped being finite.
struct NonFiniteError : Error {
    using Error::Error;
};

/// Exhaustive cut enumeration refused (n > 16).
struct TooManyAgentsError : Error {
    using Error::Error;
};

/// A bound check needs a partition whose mass bound M has not been certified.
struct PartitionNotCertifiedError : Error {
    using Error::Error;
};

/// Pairwise-reciprocity precondition of the partition builder failed.
struct AssumptionViolatedError : Error {
    using Error::Error;
};

/// The partition builder reached its provably-unreachable failure case.
struct InternalCase0Error : Error {
    using Error::Error;
};

/// A computed transition matrix had an entry below the -1e-10 floor.
struct NumericalFaultError : Error {
    using Error::Error;
};

/// Tail-window analysis was asked for on a trajectory with too few samples.
struct TrajectoryTooShortError : Error {
    using Error::Error;
};

/// Integration step exceeds the limit tied to the activation gap.
struct StepTooLargeError : Error {
    using Error::Error;
};

/// Robot scenario violates a feasibility constraint.
struct InfeasibleScenarioError : Error {
    using Error::Error;
};

/// File could not be read, parsed or written.
struct IoError : Error {
    using Error::Error;
};

} // namespace recipro
