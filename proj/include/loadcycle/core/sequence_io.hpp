#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "loadcycle/core/types.hpp"

namespace loadcycle::core {

// Line format: "# loadcycle-v1 rate=5" header, then one
// "t,p_bu,v_veh,u_js,p_cc,p_bo,label" record per sample.
inline constexpr const char* kSequenceHeader = "# loadcycle-v1 rate=5";
inline constexpr const char* kSequenceExtension = ".lcs";

void write_sequence(std::ostream& out, const LabeledSequence& seq);
LabeledSequence read_sequence(std::istream& in, Origin origin, const std::string& cycle_id);

void save_sequence(const std::filesystem::path& path, const LabeledSequence& seq);
LabeledSequence load_sequence(const std::filesystem::path& path, Origin origin);

// One file per cycle, named <prefix>_NNN.lcs; returns the written paths.
std::vector<std::filesystem::path> save_dataset(const std::filesystem::path& dir, const std::string& prefix,
                                                const std::vector<LabeledSequence>& seqs);
// Loads a single file or every *.lcs file of a directory in name order.
std::vector<LabeledSequence> load_dataset(const std::filesystem::path& path, Origin origin);

}  // namespace loadcycle::core
