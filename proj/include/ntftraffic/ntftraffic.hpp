#pragma once

#include "ntftraffic/clustering.hpp"
#include "ntftraffic/datagen.hpp"
#include "ntftraffic/errors.hpp"
#include "ntftraffic/factorization.hpp"
#include "ntftraffic/io.hpp"
#include "ntftraffic/linalg.hpp"
#include "ntftraffic/prediction.hpp"
#include "ntftraffic/tensor.hpp"
