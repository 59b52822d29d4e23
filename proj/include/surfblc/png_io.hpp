#pragma once

#include <filesystem>

#include "surfblc/image.hpp"

namespace surfblc {

ReflectionImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ReflectionImage& img);

} // namespace surfblc
