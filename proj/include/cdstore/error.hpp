#pragma once

#include <stdexcept>
#include <string>

namespace cdstore {

enum class Errc {
  contract_violation,
  insufficient_shares,
  integrity_mismatch,
  all_subsets_failed,
  not_found,
  corruption,
  protocol,
  backend,
  capacity,
  insufficient_clouds,
  usage,
  parse,
  io,
};

const char* errc_name(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(Errc::contract_violation, what);
}

}  // namespace cdstore
