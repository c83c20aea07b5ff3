// Copyright 2026 the conan authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace conan {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An argument outside its documented domain (e.g. a relevance score not in
/// [0,1], or stepping a terminal episode).
struct DomainError : Error {
  using Error::Error;
};

/// Malformed or inconsistent input data. Carries the 1-based line number when
/// raised from a line-delimited reader; ingestion stops at the first bad line.
struct IngestError : Error {
  IngestError(std::size_t line_number, const std::string& what)
      : Error("line " + std::to_string(line_number) + ": " + what),
        line(line_number) {}
  std::size_t line;
};

/// A curriculum stratum cannot satisfy its quota.
struct QuotaError : Error {
  QuotaError(std::string stratum_name, const std::string& what)
      : Error(what), stratum(std::move(stratum_name)) {}
  std::string stratum;
};

/// Caller-side contract violation while scoring a rollout (e.g. the truth has
/// a different round count than the rollout).
struct ScoringError : Error {
  using Error::Error;
};

/// Bad configuration: flags, config file, or environment.
struct ConfigError : Error {
  using Error::Error;
};

/// The remote reasoner was unreachable or kept failing after retries.
struct ReasonerError : Error {
  using Error::Error;
};

}  // namespace conan
