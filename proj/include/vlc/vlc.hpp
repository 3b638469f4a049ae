// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "vlc/analog_chain.hpp"
#include "vlc/config.hpp"
#include "vlc/constellation_io.hpp"
#include "vlc/constellations.hpp"
#include "vlc/difference_sets.hpp"
#include "vlc/error.hpp"
#include "vlc/fft.hpp"
#include "vlc/ofdm.hpp"
#include "vlc/receiver.hpp"
#include "vlc/simkit.hpp"
#include "vlc/version.hpp"
#include "vlc/waveform.hpp"
