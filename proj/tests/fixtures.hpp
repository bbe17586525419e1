#pragma once

#include <string>

#include "avth/frame.hpp"

namespace avth::testfix {

// Mouth openness in [0,1] at a point in time; also drives the loudness of
// speech_audio so video and audio fixtures are aligned.
double mouth_envelope(double seconds);

// Procedural talking head: shaded background, soft-edged head with slight
// sway, eyes, and a mouth whose opening follows mouth_envelope.
Frame head_frame_rgb(int w, int h, double seconds);
Frame head_frame_420(int w, int h, double seconds);

FrameSequence head_sequence(int frames, int w, int h, Rational fps = {25, 1});

// Harmonic voice-ish tone, amplitude tracking mouth_envelope.
AudioClip speech_audio(double seconds, int sample_rate);

// Unique file path in a per-process scratch directory.
std::string temp_path(const std::string& name);

}  // namespace avth::testfix
