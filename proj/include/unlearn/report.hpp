#pragma once

#include <string>

#include "unlearn/run_report.hpp"

namespace unlearn {

// CSV header shared by every history file the project writes.
extern const char* kHistoryCsvHeader;

// Writes history.csv, summary.txt and, when present, one CSV + PPM heat
// image per recolored confusion matrix. Output bytes are a pure function of
// the report, so re-emitting an identical report reproduces identical files.
void emit_report(const RunReport& report, const std::string& dir);

void write_history_csv(const RunReport& report, const std::string& path);
void write_confusion_csv(const ConfusionMatrix& m, const std::string& path);
void write_confusion_ppm(const ConfusionMatrix& m, const std::string& path, std::size_t cell_px = 16);

// FNV-1a content hash used by run manifests.
std::uint64_t hash_file(const std::string& path);

}  // namespace unlearn
