// Copyright 2026 The tracefix Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tracefix/error.hpp"

namespace tracefix {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoErrorHeader: return "NoErrorHeader";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::LaunchFailure: return "LaunchFailure";
    case ErrorCode::RecordFailure: return "RecordFailure";
    case ErrorCode::RejectedCommand: return "RejectedCommand";
    case ErrorCode::SessionDead: return "SessionDead";
    case ErrorCode::BuildFailed: return "BuildFailed";
    case ErrorCode::NoSuchFile: return "NoSuchFile";
    case ErrorCode::PathEscapesRoot: return "PathEscapesRoot";
    case ErrorCode::ServerUnavailable: return "ServerUnavailable";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::TranscriptExhausted: return "TranscriptExhausted";
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::ProtocolError: return "ProtocolError";
    case ErrorCode::ScriptFailed: return "ScriptFailed";
    case ErrorCode::SandboxViolation: return "SandboxViolation";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::NonZeroExit: return "NonZeroExit";
    case ErrorCode::UnparseableDiff: return "UnparseableDiff";
    case ErrorCode::EmptyTarget: return "EmptyTarget";
    case ErrorCode::NoPlausibleLocation: return "NoPlausibleLocation";
    case ErrorCode::CorrectionFailed: return "CorrectionFailed";
    case ErrorCode::ApplyConflict: return "ApplyConflict";
    case ErrorCode::InvalidManifest: return "InvalidManifest";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace tracefix
