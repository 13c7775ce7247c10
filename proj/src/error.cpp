#include "guidekit/error.hpp"

namespace guidekit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::InvalidEncoding: return "InvalidEncoding";
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::AuthMissing: return "AuthMissing";
    case ErrorCode::ExhaustedRetries: return "ExhaustedRetries";
    case ErrorCode::RequestRejected: return "RequestRejected";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::MockMiss: return "MockMiss";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownGuideline: return "UnknownGuideline";
    case ErrorCode::UnparseableGeneration: return "UnparseableGeneration";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::ImbalancedDataset: return "ImbalancedDataset";
    case ErrorCode::QuotaViolation: return "QuotaViolation";
    case ErrorCode::LeakageViolation: return "LeakageViolation";
    case ErrorCode::UnknownItem: return "UnknownItem";
    case ErrorCode::UnknownChunk: return "UnknownChunk";
    case ErrorCode::InsufficientReplay: return "InsufficientReplay";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::Config: return "Config";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

}  // namespace guidekit
