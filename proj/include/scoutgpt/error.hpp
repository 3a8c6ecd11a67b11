#ifndef SCOUTGPT_ERROR_HPP_
#define SCOUTGPT_ERROR_HPP_

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace scoutgpt {

enum class Errc {
  malformed_input,
  domain,
  unknown_player,
  grammar_violation,
  shape,
  degenerate_batch,
  context_overflow,
  vocabulary_mismatch,
  not_found,
  limit,
  io,
};

inline std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::malformed_input: return "malformed_input";
    case Errc::domain: return "domain_error";
    case Errc::unknown_player: return "unknown_player";
    case Errc::grammar_violation: return "grammar_violation";
    case Errc::shape: return "shape_error";
    case Errc::degenerate_batch: return "degenerate_batch";
    case Errc::context_overflow: return "context_overflow";
    case Errc::vocabulary_mismatch: return "vocabulary_mismatch";
    case Errc::not_found: return "not_found";
    case Errc::limit: return "limit_exceeded";
    case Errc::io: return "io_error";
  }
  return "error";
}

// All library failures are reported through this type. `position` carries the
// offending index (action index, token position) when one exists.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message,
        std::optional<std::size_t> position = std::nullopt)
      : std::runtime_error(message), code_(code), position_(position) {}

  Errc code() const noexcept { return code_; }
  std::optional<std::size_t> position() const noexcept { return position_; }

 private:
  Errc code_;
  std::optional<std::size_t> position_;
};

}  // namespace scoutgpt

#endif  // SCOUTGPT_ERROR_HPP_
