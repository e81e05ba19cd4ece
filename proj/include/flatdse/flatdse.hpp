#pragma once

// Umbrella header.

#include "flatdse/costmodel.hpp"
#include "flatdse/dataflow.hpp"
#include "flatdse/dse.hpp"
#include "flatdse/hardware.hpp"
#include "flatdse/io.hpp"
#include "flatdse/refexec.hpp"
#include "flatdse/workload.hpp"
