#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <type_traits>

namespace detmac {

/// Simulation time and durations share one integer base: 1 tick = 1 us.
using Duration = std::chrono::microseconds;
using SimTime = std::chrono::microseconds;

enum class DeviceId : std::uint32_t {};
enum class StarId : std::uint32_t {};
enum class AllocationId : std::uint32_t {};

template <typename E>
  requires std::is_enum_v<E>
constexpr auto raw(E e) noexcept
{
    return static_cast<std::underlying_type_t<E>>(e);
}

inline constexpr DeviceId kBroadcast{0xFFFFFFFFu};

/// A star is identified by its coordinator's device id.
constexpr DeviceId coordinator_of(StarId s) noexcept { return DeviceId{raw(s)}; }

} // namespace detmac
