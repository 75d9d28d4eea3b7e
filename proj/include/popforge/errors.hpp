#pragma once

#include <stdexcept>
#include <string>

namespace popforge {

// Base class for all errors raised by this library. The CLI catches this
// type at its boundary and maps it to exit code 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define POPFORGE_ERROR(NAME)                                    \
    struct NAME : Error {                                       \
        explicit NAME(const std::string& msg) : Error(msg) {}   \
    }

// audio_io
POPFORGE_ERROR(FileNotFound);
POPFORGE_ERROR(UnsupportedFormat);
POPFORGE_ERROR(EmptyAudio);

// pop_detect
POPFORGE_ERROR(ClipTooShort);

// gfcc
POPFORGE_ERROR(InvalidBand);
POPFORGE_ERROR(EmptyWindow);

// corpus
POPFORGE_ERROR(MalformedLine);
POPFORGE_ERROR(UnknownLabelToken);
POPFORGE_ERROR(InsufficientClassCount);
POPFORGE_ERROR(EmptyCorpus);

// learner
POPFORGE_ERROR(TooFewMinoritySamples);
POPFORGE_ERROR(SingleClass);
POPFORGE_ERROR(DegenerateData);
POPFORGE_ERROR(UntrainedModel);

// evaluator
POPFORGE_ERROR(LengthMismatch);
POPFORGE_ERROR(EmptyEval);

// filesystem / serialization
POPFORGE_ERROR(IoError);

#undef POPFORGE_ERROR

} // namespace popforge
