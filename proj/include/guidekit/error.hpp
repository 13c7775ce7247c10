#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace guidekit {

enum class ErrorCode {
  InvalidArgument,
  Io,
  Parse,
  InvalidEncoding,
  MissingFile,
  DuplicateId,
  EmptyFile,
  UnknownCategory,
  EmptyCorpus,
  LengthMismatch,
  AuthMissing,
  ExhaustedRetries,
  RequestRejected,
  MalformedResponse,
  BackendError,
  MockMiss,
  EmptyBatch,
  DimensionMismatch,
  UnknownGuideline,
  UnparseableGeneration,
  InvariantViolation,
  ImbalancedDataset,
  QuotaViolation,
  LeakageViolation,
  UnknownItem,
  UnknownChunk,
  InsufficientReplay,
  EmptyDocument,
  Config,
  Usage,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the toolkit. The code is stable and is what the
/// CLI writes into its machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<int> http_status = std::nullopt)
      : std::runtime_error(message), code_(code), http_status_(http_status) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] std::optional<int> http_status() const noexcept {
    return http_status_;
  }

 private:
  ErrorCode code_;
  std::optional<int> http_status_;
};

}  // namespace guidekit
