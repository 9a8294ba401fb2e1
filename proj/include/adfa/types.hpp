// Copyright (c) 2026 The ADFA Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace adfa {

template <typename S>
using MatX = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using VecX = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using RowVecX = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using Mat = MatX<double>;
using Vec = VecX<double>;
using MatF = MatX<float>;
using VecF = VecX<float>;

/// Channel-major image tensor: row c of `data` is channel c, flattened
/// row-major over (row, col), i.e. column index = r * width + c.
template <typename S>
struct PlanesT {
  MatX<S> data;  // channels x (height*width)
  int height = 0;
  int width = 0;

  PlanesT() = default;
  PlanesT(int channels, int h, int w)
      : data(MatX<S>::Zero(channels, static_cast<Eigen::Index>(h) * w)),
        height(h),
        width(w) {}

  int channels() const { return static_cast<int>(data.rows()); }
  Eigen::Index positions() const { return data.cols(); }

  S& at(int c, int r, int col) { return data(c, static_cast<Eigen::Index>(r) * width + col); }
  S at(int c, int r, int col) const { return data(c, static_cast<Eigen::Index>(r) * width + col); }
};

using Planes = PlanesT<double>;

enum class ErrorClass { config, ingestion, numeric, argument, io, internal };

inline const char* to_string(ErrorClass c) {
  switch (c) {
    case ErrorClass::config: return "config";
    case ErrorClass::ingestion: return "ingestion";
    case ErrorClass::numeric: return "numeric";
    case ErrorClass::argument: return "argument";
    case ErrorClass::io: return "io";
    default: return "internal";
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& msg) : std::runtime_error(msg), cls_(cls) {}
  ErrorClass error_class() const { return cls_; }

 private:
  ErrorClass cls_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(ErrorClass::config, msg) {}
};
struct IngestionError : Error {
  explicit IngestionError(const std::string& msg) : Error(ErrorClass::ingestion, msg) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& msg) : Error(ErrorClass::numeric, msg) {}
};
struct ArgumentError : Error {
  explicit ArgumentError(const std::string& msg) : Error(ErrorClass::argument, msg) {}
};
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(ErrorClass::io, msg) {}
};

}  // namespace adfa
