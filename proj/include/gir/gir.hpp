#pragma once

#include "gir/datasetgen.hpp"
#include "gir/degradations.hpp"
#include "gir/error.hpp"
#include "gir/evaluation.hpp"
#include "gir/image.hpp"
#include "gir/image_io.hpp"
#include "gir/imaging.hpp"
#include "gir/jpeg.hpp"
#include "gir/kernels.hpp"
#include "gir/parallel.hpp"
#include "gir/pipeline.hpp"
#include "gir/rng.hpp"
#include "gir/taskselect.hpp"
