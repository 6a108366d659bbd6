#pragma once

#include "unimts/augment.hpp"
#include "unimts/contrastive.hpp"
#include "unimts/device.hpp"
#include "unimts/diff/grad_check.hpp"
#include "unimts/diff/ops.hpp"
#include "unimts/diff/optim.hpp"
#include "unimts/diff/tape.hpp"
#include "unimts/diff/tensor.hpp"
#include "unimts/error.hpp"
#include "unimts/hash.hpp"
#include "unimts/inference.hpp"
#include "unimts/io/checkpoint.hpp"
#include "unimts/io/description_file.hpp"
#include "unimts/io/embedding_file.hpp"
#include "unimts/io/manifest.hpp"
#include "unimts/io/skeleton_file.hpp"
#include "unimts/io/structure_file.hpp"
#include "unimts/io/timeseries_file.hpp"
#include "unimts/model.hpp"
#include "unimts/motion.hpp"
#include "unimts/parallel.hpp"
#include "unimts/physics.hpp"
#include "unimts/quat.hpp"
#include "unimts/rng.hpp"
#include "unimts/skeleton.hpp"
#include "unimts/stgcn.hpp"
#include "unimts/text_embed.hpp"
#include "unimts/toy.hpp"
