#include "ragvv/hashing.hpp"

#include <fmt/format.h>

namespace ragvv {

std::string to_hex(std::uint64_t value) { return fmt::format("{:016x}", value); }

}  // namespace ragvv
