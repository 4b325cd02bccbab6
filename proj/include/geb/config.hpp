#ifndef GEB_CONFIG_HPP
#define GEB_CONFIG_HPP

#include <string>

#include "geb/trainer.hpp"

namespace geb {

// Parses the JSON run configuration. Key names mirror RunConfig fields
// one-to-one; unknown keys are rejected so typos never pass silently.
RunConfig parse_config_text(const std::string& text);
RunConfig parse_config(const std::string& path);

} // namespace geb

#endif
