/**
 * @file timetag_io.hpp
 * @brief On-disk forms of the ground tag stream and the satellite record.
 *
 * Binary tags: 16-byte records, u64 little-endian time in ps, u8 channel,
 * 7 reserved zero bytes. Satellite record: CSV with `#` metadata lines
 * (slot range, pulses sent per intensity) above `pulse_index,basis,bit,intensity_id`.
 */

#pragma once

#include <filesystem>
#include <iosfwd>

#include "qgs/quantum_layer.hpp"

namespace qgs {

inline constexpr std::size_t kTagRecordBytes = 16;

void write_tags_binary(std::ostream& os, const TimeTagStream& tags);
/// Throws FormatError with the byte offset of the first bad record.
TimeTagStream read_tags_binary(std::istream& is);

void write_tags_csv(std::ostream& os, const TimeTagStream& tags);
TimeTagStream read_tags_csv(std::istream& is);

void write_satellite_csv(std::ostream& os, const SatelliteRecord& rec);
SatelliteRecord read_satellite_csv(std::istream& is);

TimeTagStream load_tags(const std::filesystem::path& path);
void save_tags(const std::filesystem::path& path, const TimeTagStream& tags);
SatelliteRecord load_satellite(const std::filesystem::path& path);
void save_satellite(const std::filesystem::path& path, const SatelliteRecord& rec);

}  // namespace qgs
