#pragma once

#include <string>
#include <vector>

#include "thermodepth/types.hpp"

namespace thermodepth {

// On-disk layout, one directory per sequence under the dataset root:
//
//   <root>/<sequence_id>/thermal/000000.png   16-bit grayscale raw counts
//   <root>/<sequence_id>/depth/000000.png     16-bit millimeters, 0 = invalid
//   <root>/<sequence_id>/index.csv            frame_index,timestamp,nuc_flag,motion_x,motion_y
//   <root>/<sequence_id>/meta.json            radiometric, min_depth, max_depth, seed
//
// Real-valued CSV fields are printed with 17 significant digits, so every
// double survives the round trip.

void write_sequence(const SequenceSample& sample, const std::string& dir);
SequenceSample read_sequence(const std::string& dir);

void write_dataset(const std::vector<SequenceSample>& samples, const std::string& root);
/// Reads every sub-directory of root in name order. A root that itself holds
/// an index.csv is read as a single sequence.
std::vector<SequenceSample> read_dataset(const std::string& root);

/// FNV-1a over every file of the dataset in path order; equal datasets on
/// disk hash equal.
std::string dataset_hash(const std::string& root);

}  // namespace thermodepth
