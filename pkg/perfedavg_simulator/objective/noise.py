"""Random noise generator classes used to build per-sample losses of synthetic tasks."""

from abc import ABC, abstractmethod

import numpy as np
from numpy.typing import NDArray

from perfedavg_simulator.common.errors import InvalidArgumentError
from perfedavg_simulator.common.types import Scalar


class NoiseGenerator(ABC):
    """This class's purpose is to draw batches of noise vectors of a fixed dimension. It acts as
    a base class for other generators. Generators hold no random state: every draw takes the
    generator of the caller's stream.

    Attributes:
        `dim` (int): Length of one flattened noise draw.
    """

    def __init__(self, dim: int):
        """Initializes an instance of `NoiseGenerator`. Note that this class cannot be
        instantiated directly since it is abstract.

        Args:
            `dim` (int): Length of one flattened noise draw.
        """
        if dim < 1:
            raise InvalidArgumentError(f"Noise dimension must be positive, got {dim}")
        self.__dim = dim

    def draw(self, count: int, rng: np.random.Generator) -> NDArray[np.float64]:
        """Draws `count` noise vectors. This function acts as an alias to the function _draw().

        Args:
            `count` (int): Number of draws.
            `rng` (np.random.Generator): Source of randomness.

        Returns:
            NDArray[np.float64]: Array of shape (count, dim).
        """
        if count < 1:
            raise InvalidArgumentError(f"Draw count must be positive, got {count}")
        return self._draw(count, rng)

    @abstractmethod
    def _draw(self, count: int, rng: np.random.Generator) -> NDArray[np.float64]:
        """Draws `count` noise vectors.

        Returns:
            NDArray[np.float64]: Array of shape (count, dim).
        """
        pass

    @property
    def dim(self) -> int:
        return self.__dim


class GaussianNoise(NoiseGenerator):
    """This class draws vectors with i.i.d. zero-mean gaussian coordinates.

    Attributes:
        `stdev` (Scalar): Standard deviation of each coordinate. Nonnegative.

    Extends: NoiseGenerator
    """

    def __init__(self, dim: int, stdev: Scalar):
        super().__init__(dim=dim)
        if stdev < 0:
            raise InvalidArgumentError(f"Noise standard deviation must be nonnegative, got {stdev}")
        self.__stdev = float(stdev)

    def _draw(self, count: int, rng: np.random.Generator) -> NDArray[np.float64]:
        return rng.normal(0.0, 1.0, size=(count, self.dim)) * self.stdev

    @property
    def stdev(self) -> float:
        return self.__stdev


class SymmetricMatrixNoise(NoiseGenerator):
    """This class draws random symmetric d x d matrices with Frobenius norm exactly `scale`,
    flattened row-major. A draw is scale * S / |S|_F with S the symmetric part of a gaussian
    matrix, so the distribution is symmetric about zero and has zero mean.

    Attributes:
        `size` (int): Matrix side d.
        `scale` (Scalar): Frobenius norm of every draw. Nonnegative.

    Extends: NoiseGenerator
    """

    def __init__(self, size: int, scale: Scalar):
        super().__init__(dim=size * size)
        if scale < 0:
            raise InvalidArgumentError(f"Matrix noise scale must be nonnegative, got {scale}")
        self.__size = size
        self.__scale = float(scale)

    def _draw(self, count: int, rng: np.random.Generator) -> NDArray[np.float64]:
        gaussian = rng.normal(0.0, 1.0, size=(count, self.size, self.size))
        symmetric = 0.5 * (gaussian + np.transpose(gaussian, (0, 2, 1)))
        norms = np.linalg.norm(symmetric, axis=(1, 2))
        scaled = symmetric * (self.scale / norms)[:, np.newaxis, np.newaxis]
        return scaled.reshape(count, self.dim)

    @property
    def size(self) -> int:
        return self.__size

    @property
    def scale(self) -> float:
        return self.__scale


class ConstantNoise(NoiseGenerator):
    """This class returns the same vector on every draw and consumes no randomness.

    Attributes:
        `constant` (NDArray[np.float64]): The vector returned by every draw.

    Extends: NoiseGenerator
    """

    def __init__(self, constant: NDArray[np.float64]):
        constant = np.asarray(constant, dtype=np.float64).reshape(-1)
        super().__init__(dim=constant.size)
        self.__constant = constant

    def _draw(self, count: int, rng: np.random.Generator) -> NDArray[np.float64]:
        return np.tile(self.__constant, (count, 1))

    @property
    def constant(self) -> NDArray[np.float64]:
        return self.__constant


def make_noise(dim: int, stdev: Scalar) -> NoiseGenerator:
    """Gaussian vector noise, or an all-zero constant when `stdev` is zero."""
    if stdev == 0:
        return ConstantNoise(np.zeros(dim))
    return GaussianNoise(dim=dim, stdev=stdev)


def make_matrix_noise(size: int, scale: Scalar) -> NoiseGenerator:
    """Symmetric matrix noise, or an all-zero constant when `scale` is zero."""
    if scale == 0:
        return ConstantNoise(np.zeros(size * size))
    return SymmetricMatrixNoise(size=size, scale=scale)
