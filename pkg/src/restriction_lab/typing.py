import typing as t

import numpy as np
import numpy.typing as npt

FloatArray = npt.NDArray[np.float64]

ComplexArray = npt.NDArray[np.complex128]

RealOrArray = t.Union[float, FloatArray]

RadialProfile = t.Callable[[FloatArray], FloatArray]

CsvRow = t.Mapping[str, t.Any]
