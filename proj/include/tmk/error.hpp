// Copyright 2026 The tmkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tmk {

enum class Errc {
  ambiguous_path,
  parse_error,
  invalid_model,
  unresolved_element,
  empty_region,
  anchor_not_in_region,
  region_disconnected,
  duplicate_event_id,
  unknown_event,
  mixed_models,
  not_anchored,
  cascade_overflow,
  stimulus_target_invalid,
  duplicate_thing_id,
  unknown_choice_point,
  invalid_outcome,
  missing_column,
  nondeterministic_table,
  empty_table,
  unhandled_event,
  bad_params,
  state_budget_exceeded,
  precondition,
  io,
};

constexpr std::string_view errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::ambiguous_path: return "AMBIGUOUS_PATH";
    case Errc::parse_error: return "PARSE_ERROR";
    case Errc::invalid_model: return "INVALID_MODEL";
    case Errc::unresolved_element: return "UNRESOLVED_ELEMENT";
    case Errc::empty_region: return "EMPTY_REGION";
    case Errc::anchor_not_in_region: return "ANCHOR_NOT_IN_REGION";
    case Errc::region_disconnected: return "REGION_DISCONNECTED";
    case Errc::duplicate_event_id: return "DUPLICATE_EVENT_ID";
    case Errc::unknown_event: return "UNKNOWN_EVENT";
    case Errc::mixed_models: return "MIXED_MODELS";
    case Errc::not_anchored: return "NOT_ANCHORED";
    case Errc::cascade_overflow: return "CASCADE_OVERFLOW";
    case Errc::stimulus_target_invalid: return "STIMULUS_TARGET_INVALID";
    case Errc::duplicate_thing_id: return "DUPLICATE_THING_ID";
    case Errc::unknown_choice_point: return "UNKNOWN_CHOICE_POINT";
    case Errc::invalid_outcome: return "INVALID_OUTCOME";
    case Errc::missing_column: return "MISSING_COLUMN";
    case Errc::nondeterministic_table: return "NONDETERMINISTIC_TABLE";
    case Errc::empty_table: return "EMPTY_TABLE";
    case Errc::unhandled_event: return "UNHANDLED_EVENT";
    case Errc::bad_params: return "BAD_PARAMS";
    case Errc::state_budget_exceeded: return "STATE_BUDGET_EXCEEDED";
    case Errc::precondition: return "PRECONDITION";
    case Errc::io: return "IO_ERROR";
  }
  return "UNKNOWN";
}

/// Every failure surfaced by the library carries one of the Errc codes so that
/// callers (and the CLI) can report a stable error name.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }
  std::string_view name() const noexcept { return errc_name(code_); }

 private:
  Errc code_;
};

}  // namespace tmk
