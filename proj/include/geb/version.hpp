#ifndef GEB_VERSION_HPP
#define GEB_VERSION_HPP

namespace geb {

inline constexpr const char* kVersion = "0.1.0";

} // namespace geb

#endif
