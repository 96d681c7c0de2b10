#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace domforge {

struct Document {
  std::string id;
  std::string title;
  std::string text;
};

// Streams documents from either
//   * a directory of UTF-8 text files (sorted by file name, id = file stem), or
//   * a JSON-lines file whose objects carry `text` and optionally `doc_id`
//     (or `id`) and `title`. Lines without an id get "line-<n>".
// Blank JSON lines are skipped. Throws IngestionError naming the file and
// line for unreadable or malformed records.
void for_each_document(const std::filesystem::path& source,
                       const std::function<void(Document&&)>& visit);

std::vector<Document> read_documents(const std::filesystem::path& source);

}  // namespace domforge
