// Core scalar/vector/matrix aliases and the error taxonomy shared by all
// transtarec modules. Eigen is the only math dependency.
#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace transtarec {

using Scalar = double;
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
// Embedding tables are row-per-entity; row-major keeps SGD row updates contiguous.
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kMonths = 12;
inline constexpr int kWeekdays = 7;  // 0 = Monday
inline constexpr int kHours = 24;

// Calendar key of one check-in instant, in the record's local time.
struct TimeKey {
  int month = 1;    // 1..12
  int weekday = 0;  // 0..6, 0 = Monday
  int hour = 0;     // 0..23

  bool valid() const {
    return month >= 1 && month <= kMonths && weekday >= 0 && weekday < kWeekdays &&
           hour >= 0 && hour < kHours;
  }
  // Dense index into [0, 12*7*24); used by exclusion sets and tests.
  int packed() const { return ((month - 1) * kWeekdays + weekday) * kHours + hour; }

  friend bool operator==(const TimeKey&, const TimeKey&) = default;
};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// data ingestion
struct FileNotFoundError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct EmptyCorpusError : Error { using Error::Error; };
struct InvalidArgumentError : Error { using Error::Error; };

// model core
struct DegenerateNormalError : Error { using Error::Error; };
struct NonUnitNormalError : Error { using Error::Error; };
struct EmptyCandidatesError : Error { using Error::Error; };

// training
struct ExhaustedCandidatesError : Error { using Error::Error; };
struct NonFiniteGradientError : Error { using Error::Error; };
struct EmptyTrainingSetError : Error { using Error::Error; };

// evaluation
struct EmptyTestSetError : Error { using Error::Error; };
struct VocabMismatchError : Error { using Error::Error; };
struct MismatchedConfigError : Error { using Error::Error; };

// persistence
struct IoError : Error { using Error::Error; };
struct BadMagicError : Error { using Error::Error; };
struct UnsupportedVersionError : Error { using Error::Error; };
struct ShapeMismatchError : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

}  // namespace transtarec
