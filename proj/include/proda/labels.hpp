#pragma once

#include <cstdint>
#include <vector>

namespace proda {

using Label = std::int32_t;
inline constexpr Label kIgnore = -1;

using Labels = std::vector<Label>;

} // namespace proda
