// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace vlc {

inline constexpr const char* toolkit_version = "0.1.0";
inline constexpr int config_schema_version = 1;

} // namespace vlc
