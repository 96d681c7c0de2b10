#include "domforge/corpus.h"

#include <algorithm>
#include <fstream>
#include <iterator>

#include "domforge/error.h"
#include "json.hpp"

namespace domforge {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot read document " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void read_jsonl(const fs::path& path, const std::function<void(Document&&)>& visit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open corpus " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IngestionError("undecodable record at " + where + ": " + e.what());
    }
    if (!record.is_object() || !record.contains("text") || !record["text"].is_string()) {
      throw IngestionError("record at " + where + " has no string `text` field");
    }
    Document doc;
    if (record.contains("doc_id")) {
      doc.id = record["doc_id"].is_string() ? record["doc_id"].get<std::string>()
                                            : record["doc_id"].dump();
    } else if (record.contains("id")) {
      doc.id = record["id"].is_string() ? record["id"].get<std::string>() : record["id"].dump();
    } else {
      doc.id = "line-" + std::to_string(line_no);
    }
    if (record.contains("title") && record["title"].is_string()) {
      doc.title = record["title"].get<std::string>();
    }
    doc.text = record["text"].get<std::string>();
    visit(std::move(doc));
  }
}

}  // namespace

void for_each_document(const fs::path& source,
                       const std::function<void(Document&&)>& visit) {
  std::error_code ec;
  if (fs::is_directory(source, ec)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(source)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      visit(Document{file.stem().string(), "", read_file(file)});
    }
    return;
  }
  if (!fs::is_regular_file(source, ec)) {
    throw IngestionError("corpus path does not exist: " + source.string());
  }
  read_jsonl(source, visit);
}

std::vector<Document> read_documents(const fs::path& source) {
  std::vector<Document> docs;
  for_each_document(source, [&](Document&& doc) { docs.push_back(std::move(doc)); });
  return docs;
}

}  // namespace domforge
