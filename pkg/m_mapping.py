# m_mapping.py
from stream_pipeline.data_package import DataPackage, DataPackageController, DataPackagePhase, DataPackageModule, Status
from stream_pipeline.module_classes import ExecutionModule, ModuleOptions

from backend import BackendSession
from errors import RadarBAError
import data
import logger

log = logger.get_logger()

class Local_Mapping(ExecutionModule):
    def __init__(self,
                    session: BackendSession,
                    timeout: float = 3600.0
                ) -> None:
        super().__init__(ModuleOptions(
                                use_mutex=False,
                                timeout=timeout,
                            ),
                            name="Mapping-Module"
                        )
        self.session: BackendSession = session

    def execute(self, dp: DataPackage[data.RadarData], dpc: DataPackageController, dpp: DataPackagePhase, dpm: DataPackageModule) -> None:
        if not dp.data:
            raise Exception("No data found")
        if dp.data.keyframe is None:
            raise Exception("No keyframe found")

        try:
            best = self.session.map(dp.data.keyframe)
        except RadarBAError as e:
            dp.data.error = e
            dpm.message = f"Stage map failed on keyframe {dp.data.keyframe.id}: {e}"
            dpm.status = Status.EXIT
            return
        if best is not None:
            dp.data.stage_losses["map"] = best
        log.debug(f"Scene holds {len(self.session.scene)} Gaussians after keyframe {dp.data.keyframe.id}")
