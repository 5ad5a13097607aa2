#pragma once

// Umbrella header for the library (everything except the CLI layer).

#include "confluence/bench.hpp"
#include "confluence/detection.hpp"
#include "confluence/detection_io.hpp"
#include "confluence/evaluation.hpp"
#include "confluence/flat.hpp"
#include "confluence/geometry.hpp"
#include "confluence/pipeline.hpp"
#include "confluence/suppression.hpp"
#include "confluence/synthetic.hpp"
