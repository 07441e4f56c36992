#pragma once

#include <stdexcept>
#include <string>

namespace maelm {

// Base for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape disagreement between tensor operands; message names both shapes.
struct DimensionError : Error {
    using Error::Error;
};

// A stated precondition of an operation was violated.
struct ContractError : Error {
    using Error::Error;
};

// Token original index falls outside the position-embedding table.
struct PositionRangeError : Error {
    using Error::Error;
};

// Loss requested over an empty masked-position set.
struct EmptyMaskError : Error {
    using Error::Error;
};

// Corpus ingestion problems: empty corpus, invalid UTF-8, too little data.
struct DataError : Error {
    using Error::Error;
};

// Rank of an all-zero matrix is undefined; also raised when the pooled
// sample is too small to support a rank estimate.
struct RankError : Error {
    using Error::Error;
};

// A theorem instance violates its construction invariants.
struct ConstructionError : Error {
    using Error::Error;
};

// Training produced a non-finite loss.
struct TrainingDivergedError : Error {
    long long step;
    TrainingDivergedError(const std::string& msg, long long s) : Error(msg), step(s) {}
};

// Checkpoint load failures, one kind per distinct cause.
struct CheckpointError : Error {
    enum class Kind { BadMagic, VersionMismatch, Truncated, ConfigMismatch };
    Kind kind;
    CheckpointError(Kind k, const std::string& msg) : Error(msg), kind(k) {}
};

}  // namespace maelm
