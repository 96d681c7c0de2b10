#pragma once

#include <stdexcept>
#include <string>

namespace domforge {

// Base of every error raised by the toolkit. The CLI maps ValidationError to
// its validation exit code and everything else to the runtime exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or argument values detected before any work starts.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A vocabulary file or value violates the vocabulary invariants, or a piece
// is not in the vocabulary.
class VocabularyError : public Error {
 public:
  using Error::Error;
};

// Corpus input could not be read or decoded. The message names the document.
class IngestionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace domforge
